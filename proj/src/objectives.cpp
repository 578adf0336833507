#include "aligngan/objectives.hpp"

#include "aligngan/error.hpp"
#include "aligngan/ops.hpp"

namespace aligngan {

namespace {

Var offset(Var x, double c) {
  return ops::add(x, x.graph->constant(Tensor(x.shape(), c)));
}

Var one_minus(Var x) {
  return ops::sub(x.graph->constant(Tensor(x.shape(), 1.0)), x);
}

Var guarded_log(Var u) { return ops::log(ops::clamp_min(u, kLogFloor)); }

}  // namespace

Var gan_d_loss(Var d_real, Var d_fake) {
  return ops::scale(ops::add(ops::mean(guarded_log(d_real)), ops::mean(guarded_log(one_minus(d_fake)))),
                    -1.0);
}

Var gan_g_loss(Var d_fake, bool saturating) {
  if (saturating) return ops::mean(guarded_log(one_minus(d_fake)));
  return ops::scale(ops::mean(guarded_log(d_fake)), -1.0);
}

Var lsgan_d_loss(Var d_real, Var d_fake) {
  const Var real = ops::mean(ops::square(offset(d_real, -LsganTargets::b)));
  const Var fake = ops::mean(ops::square(offset(d_fake, -LsganTargets::a)));
  return ops::scale(ops::add(real, fake), 0.5);
}

Var lsgan_g_loss(Var d_fake) {
  return ops::scale(ops::mean(ops::square(offset(d_fake, -LsganTargets::c))), 0.5);
}

Var discriminator_head(ObjectiveKind kind, Var raw_scores) {
  return kind == ObjectiveKind::regular_gan ? ops::sigmoid(raw_scores) : raw_scores;
}

Var discriminator_loss(ObjectiveKind kind, Var raw_real, Var raw_fake) {
  const Var r = discriminator_head(kind, raw_real);
  const Var f = discriminator_head(kind, raw_fake);
  return kind == ObjectiveKind::regular_gan ? gan_d_loss(r, f) : lsgan_d_loss(r, f);
}

Var generator_loss(ObjectiveKind kind, Var raw_fake, bool saturating) {
  const Var f = discriminator_head(kind, raw_fake);
  return kind == ObjectiveKind::regular_gan ? gan_g_loss(f, saturating) : lsgan_g_loss(f);
}

double gan_d_loss(const Tensor& d_real, const Tensor& d_fake) {
  Graph g;
  return gan_d_loss(g.constant(d_real), g.constant(d_fake)).value()[0];
}

double gan_g_loss(const Tensor& d_fake, bool saturating) {
  Graph g;
  return gan_g_loss(g.constant(d_fake), saturating).value()[0];
}

double lsgan_d_loss(const Tensor& d_real, const Tensor& d_fake) {
  Graph g;
  return lsgan_d_loss(g.constant(d_real), g.constant(d_fake)).value()[0];
}

double lsgan_g_loss(const Tensor& d_fake) {
  Graph g;
  return lsgan_g_loss(g.constant(d_fake)).value()[0];
}

double default_learning_rate(ObjectiveKind kind) {
  return kind == ObjectiveKind::lsgan ? 0.0005 : 0.0002;
}

const char* objective_name(ObjectiveKind kind) {
  return kind == ObjectiveKind::lsgan ? "lsgan" : "regular_gan";
}

ObjectiveKind parse_objective(std::string_view name) {
  if (name == "lsgan") return ObjectiveKind::lsgan;
  if (name == "regular_gan" || name == "gan") return ObjectiveKind::regular_gan;
  throw ConfigError("unknown objective '" + std::string(name) + "' (lsgan or regular_gan)");
}

}  // namespace aligngan
