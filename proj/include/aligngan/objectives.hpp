#pragma once

#include <string>
#include <string_view>

#include "aligngan/autodiff.hpp"

namespace aligngan {

enum class ObjectiveKind { regular_gan, lsgan };

/// Least-squares targets: fake a, real b, generator c.
struct LsganTargets {
  static constexpr double a = -1.0;
  static constexpr double b = 1.0;
  static constexpr double c = 0.0;
};

/// Floor applied inside the log terms of the regular GAN losses.
inline constexpr double kLogFloor = 1e-7;

// Regular GAN. Inputs are discriminator probabilities (post-sigmoid).
Var gan_d_loss(Var d_real, Var d_fake);
/// saturating: mean(log(1 - d_fake)); otherwise -mean(log d_fake).
Var gan_g_loss(Var d_fake, bool saturating = false);

// LSGAN. Inputs are raw discriminator scores.
Var lsgan_d_loss(Var d_real, Var d_fake);
Var lsgan_g_loss(Var d_fake);

/// Sigmoid for the regular GAN, identity for LSGAN.
Var discriminator_head(ObjectiveKind kind, Var raw_scores);

/// Losses from raw discriminator scores, head applied per `kind`.
Var discriminator_loss(ObjectiveKind kind, Var raw_real, Var raw_fake);
Var generator_loss(ObjectiveKind kind, Var raw_fake, bool saturating = false);

// Value-only conveniences.
double gan_d_loss(const Tensor& d_real, const Tensor& d_fake);
double gan_g_loss(const Tensor& d_fake, bool saturating = false);
double lsgan_d_loss(const Tensor& d_real, const Tensor& d_fake);
double lsgan_g_loss(const Tensor& d_fake);

/// 0.0002 for the regular GAN, 0.0005 for LSGAN.
double default_learning_rate(ObjectiveKind kind);

const char* objective_name(ObjectiveKind kind);
ObjectiveKind parse_objective(std::string_view name);

}  // namespace aligngan
