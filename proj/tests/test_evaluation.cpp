#include <cmath>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"

#include "aligngan/error.hpp"
#include "aligngan/evaluation.hpp"
#include "aligngan/experiment.hpp"

using namespace aligngan;

namespace {

AlignedPairs pairs_from(Tensor a, Tensor b) { return {std::move(a), std::move(b)}; }

Tensor affine(Tensor t, double s, double o) {
  for (auto& v : t.values()) v = s * v + o;
  return t;
}

}  // namespace

TEST_CASE("negation consistency") {
  Rng rng(1);
  const Tensor a = testing::random_tensor({100, 4}, rng);
  CHECK(negation_consistency(pairs_from(a, make_negative(a))) == 0.0);
  CHECK(negation_consistency(pairs_from(Tensor({100, 4}, 0.3), Tensor({100, 4}, 0.3))) ==
        doctest::Approx(0.6).epsilon(1e-12));
  CHECK(negation_consistency(pairs_from(a, testing::random_tensor({100, 4}, rng))) > 0.0);
}

TEST_CASE("alignment correlation") {
  Rng rng(2);
  const Tensor a = testing::random_tensor({100, 2}, rng);
  CHECK(*alignment_correlation(pairs_from(a, make_negative(a)), PairTransform::negation) ==
        doctest::Approx(1.0).epsilon(1e-12));
  // Invariant under a common positive affine rescaling.
  const Tensor b = testing::random_tensor({100, 2}, rng);
  const double r = *alignment_correlation(pairs_from(a, b), PairTransform::negation);
  // transform(s*a+o) = -(s*a+o); compared against s*b+o.
  const double r2 =
      *alignment_correlation(pairs_from(affine(a, 2.5, 0.0), affine(b, 2.5, 0.0)), PairTransform::negation);
  CHECK(r2 == doctest::Approx(r).epsilon(1e-12));
  const double r3 = *alignment_correlation(pairs_from(affine(a, 3.0, 0.4), affine(b, 3.0, 0.4)),
                                           PairTransform::negation);
  CHECK(r3 == doctest::Approx(r).epsilon(1e-12));
}

TEST_CASE("independent samples are nearly uncorrelated") {
  Rng rng(3);
  const Tensor a = testing::random_tensor({10000, 1}, rng), b = testing::random_tensor({10000, 1}, rng);
  CHECK(std::abs(*alignment_correlation(pairs_from(a, b), PairTransform::negation)) < 0.1);
}

TEST_CASE("alignment correlation is undefined for constant outputs") {
  Rng rng(4);
  CHECK_FALSE(alignment_correlation(pairs_from(Tensor({100, 2}, 0.5), testing::random_tensor({100, 2}, rng)),
                                    PairTransform::negation)
                  .has_value());
  CHECK_THROWS_AS(alignment_correlation(pairs_from(testing::random_tensor({99, 2}, rng),
                                                   testing::random_tensor({99, 2}, rng)),
                                        PairTransform::negation),
                  Error);
}

TEST_CASE("aligned pairs from a zero-weight generator are zero") {
  Network gen = build_generator(default_generator_spec(8, 2), 1);
  for (auto& p : gen.params()) p.value.fill(0.0);
  Rng rng(5);
  const Tensor z = sample_noise(10, 8, rng);
  const AlignedPairs p = aligned_pairs(gen, z, 0, 1);
  CHECK(p.a == Tensor({10, 1, 8, 8}, 0.0));
  CHECK(p.b == Tensor({10, 1, 8, 8}, 0.0));
  CHECK(negation_consistency(p) == 0.0);
}

TEST_CASE("aligned pairs are deterministic in parameters and noise") {
  const Network gen = build_generator(default_generator_spec(8, 2), 1);
  Rng rng(6);
  const Tensor z = sample_noise(5, 8, rng);
  const AlignedPairs p = aligned_pairs(gen, z, 0, 1), q = aligned_pairs(gen, z, 0, 1);
  CHECK(p.a == q.a);
  CHECK(p.b == q.b);
  CHECK_FALSE(p.a == p.b);
}

TEST_CASE("nearest centroid") {
  GlyphOptions o;
  o.n = 300;
  o.class_count = 5;
  o.jitter = 0.3;
  const LabeledImages d = glyph_dataset(o);
  const NearestCentroid nc = NearestCentroid::fit(d.images, d.labels, 5);
  const std::vector<std::size_t> own = nc.predict_all(nc.centroids().reshaped({5, 1, 8, 8}));
  for (std::size_t c = 0; c < 5; ++c) CHECK(own[c] == c);
  // Equidistant point goes to the lowest index.
  const Tensor two({2, 2}, std::vector<double>{1, 0, -1, 0});
  const NearestCentroid sym = NearestCentroid::fit(two, std::vector<std::size_t>{1, 0}, 2);
  const std::vector<double> mid{0.0, 5.0};
  CHECK(sym.predict(mid) == 0);
  const std::vector<std::size_t> missing(d.labels.size(), 0);
  CHECK_THROWS_AS(NearestCentroid::fit(d.images, missing, 5), Error);
}

TEST_CASE("label propagation at random init sits near chance") {
  const ExperimentConfig c = parse_config("task=multi_info_glyph\nclass_count=3\nnoise_dim=16\n");
  const Network gen = build_generator(generator_spec(c), 0);
  const LabeledImages held = make_eval_target(c);
  const double acc = label_propagation_accuracy(gen, held, 1, 100, 0);
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
  CHECK(std::abs(acc - 1.0 / 3.0) < 0.2);
  CHECK(label_propagation_accuracy(gen, held, 1, 100, 0) == acc);
}

TEST_CASE("evaluation reports") {
  CHECK_THROWS_AS(EvalReport::make("negation_consistency", 0.1, 99, 0, "x"), ConfigError);
  const EvalReport r = EvalReport::make("alignment_correlation", std::nullopt, 100, 3, "c.agck");
  const std::string json = eval_report_json(r);
  CHECK(json.find("\"value\":null") != std::string::npos);
  CHECK(json.find("\"samples\":100") != std::string::npos);
  CHECK(is_metric_name("label_propagation_accuracy"));
  CHECK_FALSE(is_metric_name("fid"));
}
