#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "eegroar/data.hpp"
#include "eegroar/zca.hpp"
#include "oracles.hpp"

using namespace eegroar;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() /
                     ("eegroar_test_" + tag + "_" +
                      std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("linear detrend removes fitted lines and is idempotent") {
  const Index sm = 32;
  Tensord ramp({2, sm});
  for (Index t = 0; t < sm; ++t) {
    ramp(0, t) = 0.5 * static_cast<Real>(t) - 3.0;
    ramp(1, t) = 5.0;  // constant channel
  }
  const Tensord flat = linear_detrend(ramp, 0, sm);
  CHECK(flat.max_abs() < 1e-9);

  // ramp + sine: the residual equals the least-squares remainder
  Tensord mixed({1, sm});
  for (Index t = 0; t < sm; ++t)
    mixed(0, t) = 0.2 * static_cast<Real>(t) +
                  std::sin(2.0 * 3.14159265358979323846 * t / 8.0);
  const Tensord res = linear_detrend(mixed, 0, sm);
  // oracle: explicit least-squares fit over the span
  Real st = 0, sx = 0, stt = 0, stx = 0;
  for (Index t = 0; t < sm; ++t) {
    st += t;
    sx += mixed(0, t);
    stt += static_cast<Real>(t) * t;
    stx += static_cast<Real>(t) * mixed(0, t);
  }
  const Real n = static_cast<Real>(sm);
  const Real slope = (n * stx - st * sx) / (n * stt - st * st);
  const Real intercept = (sx - slope * st) / n;
  for (Index t = 0; t < sm; ++t) {
    const Real expect = mixed(0, t) - (intercept + slope * t);
    CHECK(res(0, t) == doctest::Approx(expect).epsilon(1e-6));
  }

  const Tensord twice = linear_detrend(res, 0, sm);
  CHECK(max_abs_difference(twice, res) < 1e-9);

  // single-sample span subtracts a constant
  const Tensord shifted = linear_detrend(ramp, 3, 4);
  CHECK(shifted(0, 3) == doctest::Approx(0.0));

  CHECK_THROWS_AS(linear_detrend(ramp, 10, 10), std::invalid_argument);
  CHECK_THROWS_AS(linear_detrend(ramp, 0, sm + 1), std::invalid_argument);
}

TEST_CASE("synthetic sets: determinism, mask coverage, separability") {
  SynthConfig cfg;  // 16 x 128, 4 classes, 12 trials each
  Rng a(303), b(303);
  const TrialSet s1 = generate_synthetic(cfg, a);
  const TrialSet s2 = generate_synthetic(cfg, b);
  REQUIRE(s1.trials.size() == 48);
  CHECK(s1.class_count == 4);
  CHECK(s1.class_names.size() == 4);
  for (std::size_t i = 0; i < s1.trials.size(); ++i) {
    CHECK(s1.trials[i].data == s2.trials[i].data);
    CHECK(s1.trials[i].label == s2.trials[i].label);
  }

  REQUIRE(s1.ground_truth_mask.has_value());
  const Tensord& mask = *s1.ground_truth_mask;
  Real covered = 0;
  for (Index i = 0; i < mask.size(); ++i) covered += mask[i];
  CHECK(covered / static_cast<Real>(mask.size()) < 0.30);
  CHECK(covered > 0);

  // near-noiseless limit: masked features separate classes with a
  // nearest-centroid probe
  SynthConfig loud = cfg;
  loud.snr = 1e6;
  Rng c(304);
  const TrialSet big = generate_synthetic(loud, c);
  std::vector<Tensord> centroids(4, Tensord(mask.shape()));
  std::vector<int> counts(4, 0);
  for (const EegTrial& t : big.trials) {
    for (Index i = 0; i < mask.size(); ++i)
      if (mask[i] > 0) centroids[t.label][i] += t.data[i];
    ++counts[t.label];
  }
  for (int k = 0; k < 4; ++k)
    centroids[k].array() /= static_cast<Real>(counts[k]);
  int hits = 0;
  for (const EegTrial& t : big.trials) {
    int best = -1;
    Real best_d = 0;
    for (int k = 0; k < 4; ++k) {
      Real d = 0;
      for (Index i = 0; i < mask.size(); ++i)
        if (mask[i] > 0) {
          const Real diff = t.data[i] - centroids[k][i];
          d += diff * diff;
        }
      if (best < 0 || d < best_d) {
        best = k;
        best_d = d;
      }
    }
    hits += best == t.label;
  }
  CHECK(hits == static_cast<int>(big.trials.size()));
}

TEST_CASE("multi-subject synthetic sets carry per-subject ids") {
  SynthConfig cfg;
  cfg.subjects = 3;
  cfg.trials_per_class = 2;
  Rng rng(9);
  const TrialSet set = generate_synthetic(cfg, rng);
  const auto ids = set.subject_ids();
  REQUIRE(ids.size() == 3);
  CHECK(set.subject_subset(ids[0]).trials.size() == 8);
}

TEST_CASE("trial set round trip through manifest and CSVs") {
  SynthConfig cfg;
  cfg.channels = 4;
  cfg.samples = 16;
  cfg.trials_per_class = 2;
  Rng rng(77);
  const TrialSet set = generate_synthetic(cfg, rng);

  const fs::path dir = temp_dir("roundtrip");
  save_trialset(set, dir.string());
  const TrialSet loaded = load_trialset((dir / "manifest.csv").string());

  REQUIRE(loaded.trials.size() == set.trials.size());
  CHECK(loaded.class_count == set.class_count);
  CHECK(loaded.class_names == set.class_names);
  REQUIRE(loaded.ground_truth_mask.has_value());
  CHECK(*loaded.ground_truth_mask == *set.ground_truth_mask);
  for (std::size_t i = 0; i < set.trials.size(); ++i) {
    CHECK(loaded.trials[i].trial_id == set.trials[i].trial_id);
    CHECK(loaded.trials[i].subject_id == set.trials[i].subject_id);
    CHECK(loaded.trials[i].label == set.trials[i].label);
    CHECK(loaded.trials[i].sample_rate ==
          doctest::Approx(set.trials[i].sample_rate));
    CHECK(loaded.trials[i].data == set.trials[i].data);  // bit-exact
  }
  fs::remove_all(dir);
}

TEST_CASE("manifest error paths") {
  const fs::path dir = temp_dir("manifest_errors");

  {  // empty manifest: empty set, no error
    std::ofstream os(dir / "manifest.csv");
    os << "trial_id,subject_id,label,path\n";
  }
  const TrialSet empty = load_trialset((dir / "manifest.csv").string());
  CHECK(empty.trials.empty());

  {  // missing trial file is named in the error
    std::ofstream os(dir / "manifest.csv", std::ios::trunc);
    os << "trial_id,subject_id,label,path\n";
    os << "t0,s00,1,trials/absent.csv\n";
  }
  CHECK_THROWS_WITH_AS(load_trialset((dir / "manifest.csv").string()),
                       doctest::Contains("absent.csv"), std::runtime_error);

  {  // unknown label
    std::ofstream os(dir / "manifest.csv", std::ios::trunc);
    os << "trial_id,subject_id,label,path\n";
    os << "t0,s00,fear,trials/t0.csv\n";
  }
  CHECK_THROWS_WITH_AS(load_trialset((dir / "manifest.csv").string()),
                       doctest::Contains("unknown label"),
                       std::runtime_error);

  {  // ragged trial rows carry path and line
    fs::create_directories(dir / "trials");
    std::ofstream trial(dir / "trials" / "t0.csv");
    trial << "1,2,3\n1,2\n";
    std::ofstream os(dir / "manifest.csv", std::ios::trunc);
    os << "trial_id,subject_id,label,path\n";
    os << "t0,s00,0,trials/t0.csv\n";
  }
  CHECK_THROWS_WITH_AS(load_trialset((dir / "manifest.csv").string()),
                       doctest::Contains("ragged"), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("zca: eigenbasis of a 2-D toy set") {
  TrialSet set;
  set.class_count = 2;
  set.class_names = {"a", "b"};
  EegTrial t0, t1;
  t0.trial_id = "t0";
  t0.subject_id = t1.subject_id = "s00";
  t1.trial_id = "t1";
  t0.label = 0;
  t1.label = 1;
  t0.data = Tensord::from_values({1, 2}, {1, 0});
  t1.data = Tensord::from_values({1, 2}, {0, 1});
  set.trials = {t0, t1};

  const WhiteningTransform w = fit_zca(set, 0.01, WhitenScope::kJoint);
  // covariance of {(1,0),(0,1)} has eigenvectors along (1,1) and (1,-1)
  for (Index col = 0; col < 2; ++col) {
    const Real x = std::abs(w.eigenvectors(0, col));
    const Real y = std::abs(w.eigenvectors(1, col));
    CHECK(x == doctest::Approx(y).epsilon(1e-9));
    CHECK(x == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
  }
}

TEST_CASE("zca: reconstruction, whitening to identity, symmetry") {
  Rng rng(55);
  const Index d = 12;
  TrialSet set;
  set.class_count = 2;
  set.class_names = {"a", "b"};
  for (int i = 0; i < 20; ++i) {
    EegTrial t;
    t.trial_id = "t" + std::to_string(i);
    t.subject_id = "s00";
    t.label = i % 2;
    t.data = test::random_tensor({3, d / 3}, rng);
    set.trials.push_back(std::move(t));
  }

  const WhiteningTransform w = fit_zca(set, 0.0, WhitenScope::kJoint);

  // V D V^T reproduces the sample covariance
  ColMatrix<Real> obs(20, d);
  for (int i = 0; i < 20; ++i)
    obs.row(i) = set.trials[static_cast<std::size_t>(i)].data.as_vector();
  ColMatrix<Real> centered = obs;
  centered.rowwise() -= obs.colwise().mean();
  const ColMatrix<Real> cov = centered.transpose() * centered / 19.0;
  const ColMatrix<Real> rebuilt = w.eigenvectors *
                                  w.eigenvalues.asDiagonal() *
                                  w.eigenvectors.transpose();
  CHECK((rebuilt - cov).cwiseAbs().maxCoeff() < 1e-8);

  // zero-phase property: the transform matrix is symmetric
  const ColMatrix<Real> m = zca_matrix(w);
  CHECK((m - m.transpose()).cwiseAbs().maxCoeff() < 1e-9);

  // whitened training covariance is the identity at epsilon = 0
  ColMatrix<Real> white(20, d);
  for (int i = 0; i < 20; ++i)
    white.row(i) =
        apply_zca(w, set.trials[static_cast<std::size_t>(i)].data).as_vector();
  ColMatrix<Real> wc = white;
  wc.rowwise() -= white.colwise().mean();
  const ColMatrix<Real> wcov = wc.transpose() * wc / 19.0;
  CHECK((wcov - ColMatrix<Real>::Identity(d, d)).cwiseAbs().maxCoeff() <
        1e-6);
}

TEST_CASE("zca limits and errors") {
  // identity covariance: the transform is a no-op at epsilon = 0
  TrialSet set;
  set.class_count = 2;
  set.class_names = {"a", "b"};
  const Index d = 3;
  const Real scale = std::sqrt(static_cast<Real>(2 * d - 1) / 2.0);
  for (Index i = 0; i < d; ++i) {
    for (const Real sign : {1.0, -1.0}) {
      EegTrial t;
      t.trial_id = "t" + std::to_string(set.trials.size());
      t.subject_id = "s00";
      t.label = sign > 0 ? 0 : 1;
      t.data = Tensord({1, d});
      t.data(0, i) = sign * scale;
      set.trials.push_back(std::move(t));
    }
  }
  const WhiteningTransform w0 = fit_zca(set, 0.0, WhitenScope::kJoint);
  const Tensord probe = Tensord::from_values({1, d}, {0.3, -0.7, 0.2});
  CHECK(max_abs_difference(apply_zca(w0, probe), probe) < 1e-9);

  // epsilon -> infinity sends the output to zero
  const WhiteningTransform w_inf = fit_zca(set, 1e18, WhitenScope::kJoint);
  CHECK(apply_zca(w_inf, probe).max_abs() < 1e-6);

  // all-identical trials have zero covariance
  TrialSet degenerate;
  degenerate.class_count = 2;
  degenerate.class_names = {"a", "b"};
  for (int i = 0; i < 3; ++i) {
    EegTrial t;
    t.trial_id = "t" + std::to_string(i);
    t.subject_id = "s00";
    t.label = 0;
    t.data = Tensord::constant({1, 4}, 2.5);
    degenerate.trials.push_back(std::move(t));
  }
  CHECK_THROWS_WITH_AS(fit_zca(degenerate, 0.01, WhitenScope::kJoint),
                       doctest::Contains("zero covariance"),
                       std::invalid_argument);

  // dimension mismatch on apply
  CHECK_THROWS_AS(apply_zca(w0, Tensord({1, d + 1})), std::invalid_argument);

  // joint cap
  TrialSet wide = degenerate;
  for (auto& t : wide.trials) t.data = Tensord({1, 64});
  CHECK_THROWS_WITH_AS(fit_zca(wide, 0.01, WhitenScope::kJoint, 32),
                       doctest::Contains("cap"), std::invalid_argument);
}

TEST_CASE("per-channel whitening shares one transform across channels") {
  Rng rng(66);
  SynthConfig cfg;
  cfg.channels = 6;
  cfg.samples = 24;
  cfg.trials_per_class = 6;
  const TrialSet set = generate_synthetic(cfg, rng);
  const WhiteningTransform w = fit_zca(set, 0.0, WhitenScope::kPerChannel);
  CHECK(w.dim() == 24);

  // covariance over all whitened channel rows approaches the identity
  const std::vector<Tensord> white = whiten_all(w, set);
  const Index rows = static_cast<Index>(white.size()) * 6;
  ColMatrix<Real> obs(rows, 24);
  Index r = 0;
  for (const Tensord& t : white)
    for (Index c = 0; c < 6; ++c) obs.row(r++) = t.as_matrix(6, 24).row(c);
  ColMatrix<Real> centered = obs;
  centered.rowwise() -= obs.colwise().mean();
  const ColMatrix<Real> cov =
      centered.transpose() * centered / static_cast<Real>(rows - 1);
  CHECK((cov - ColMatrix<Real>::Identity(24, 24)).cwiseAbs().maxCoeff() <
        1e-6);
}
