#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "scale/errors.hpp"
#include "scale/training.hpp"

using namespace scale;

namespace {

NoisyQuadratic noiseless() {
  NoisyQuadratic q;
  q.layers = {{"embed", BlockRole::Embedding, 3, 4, 1.0, 0.0},
              {"hidden", BlockRole::Hidden, 4, 4, 2.0, 0.0},
              {"head", BlockRole::OutputHead, 4, 2, 0.5, 0.0}};
  return q;
}

NoisyQuadratic noisy() {
  NoisyQuadratic q = noiseless();
  for (auto& l : q.layers) l.noise_sigma = 0.5;
  return q;
}

}  // namespace

TEST(Training, NewtonStepPerBlockReachesZero) {
  const QuadraticProblem p(noiseless());
  OptimizerConfig c;
  c.method = Method::Sgd;
  c.peak_lr = 1.0;
  c.lr_multipliers = {{"embed", 1.0}, {"hidden", 0.5}, {"head", 2.0}};
  const auto r = run_training(p, c, constant_schedule(1, 1.0), 1, 3);
  for (const auto& b : r.params) {
    EXPECT_EQ(frobenius_norm(b.value), 0.0) << b.name;
  }
  EXPECT_EQ(r.trace.rows.size(), 1u);
  EXPECT_FALSE(r.trace.diverged);
}

TEST(Training, SameSeedSameTrace) {
  const QuadraticProblem p(noisy());
  OptimizerConfig c;
  c.method = Method::Scale;
  c.peak_lr = 0.05;
  const LrSchedule s{50, 0.1, 0.1, 0.05};
  const auto a = run_training(p, c, s, 50, 11);
  const auto b = run_training(p, c, s, 50, 11);
  std::ostringstream oa, ob;
  write_trace_csv(oa, a.trace);
  write_trace_csv(ob, b.trace);
  EXPECT_EQ(oa.str(), ob.str());
  EXPECT_EQ(a.trace.final_params_digest, b.trace.final_params_digest);
  const auto c2 = run_training(p, c, s, 50, 12);
  EXPECT_NE(c2.trace.final_params_digest, a.trace.final_params_digest);
}

TEST(Training, ScaleDescendsOnNoiselessQuadratic) {
  const QuadraticProblem p(noiseless());
  Rng init(21);
  const Params start = p.initial_params(init);
  double min_col = 1e300;
  for (const auto& b : start) {
    for (double n : column_norms(b.value)) min_col = std::min(min_col, n);
  }
  // 0.1 * min(1 / gamma) * min initial column norm.
  const double eta = 0.1 * 0.5 * min_col;
  OptimizerConfig c;
  c.method = Method::Scale;
  c.peak_lr = eta;
  const auto r = run_training(p, c, constant_schedule(60, eta), 60, 21);
  for (std::size_t t = 1; t < r.trace.rows.size(); ++t) {
    EXPECT_LT(r.trace.rows[t].loss, r.trace.rows[t - 1].loss) << t;
  }
}

TEST(Training, TraceRecordsLrAndGradNorms) {
  const QuadraticProblem p(noiseless());
  OptimizerConfig c;
  c.method = Method::Sgd;
  c.peak_lr = 0.1;
  const LrSchedule s{20, 0.25, 0.1, 0.1};
  const auto r = run_training(p, c, s, 20, 1);
  ASSERT_EQ(r.trace.rows.size(), 20u);
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& row = r.trace.rows[i];
    EXPECT_EQ(row.step, static_cast<std::int64_t>(i + 1));
    EXPECT_EQ(row.lr, lr_at(s, row.step));
    EXPECT_EQ(row.grad_norms.size(), 3u);
  }
  // Step 1 records the loss and gradient at the initial point.
  Rng init = Rng(1).split(1);
  const Params start = p.initial_params(init);
  EXPECT_EQ(r.trace.rows[0].loss, p.full_loss(start));
  EXPECT_EQ(r.trace.rows[0].grad_norms[1], frobenius_norm(2.0 * start[1].value));
}

TEST(Training, DivergenceTruncatesTrace) {
  const QuadraticProblem p(noiseless());
  OptimizerConfig c;
  c.method = Method::Sgd;
  c.peak_lr = 5.0;
  const auto r = run_training(p, c, constant_schedule(500, 5.0), 500, 2);
  EXPECT_TRUE(r.trace.diverged);
  EXPECT_LT(r.trace.rows.size(), 500u);
  EXPECT_GT(r.trace.rows.back().loss, kDivergenceLoss);
}

TEST(Training, StepsBeyondScheduleThrow) {
  const QuadraticProblem p(noiseless());
  OptimizerConfig c;
  c.method = Method::Sgd;
  EXPECT_THROW(run_training(p, c, constant_schedule(5, 0.1), 6, 1), ConfigError);
  EXPECT_THROW(run_training(p, c, constant_schedule(5, 0.1), 0, 1), ConfigError);
}

TEST(Training, ObserverSeesEveryStep) {
  const QuadraticProblem p(noisy());
  OptimizerConfig c;
  c.method = Method::Adam;
  c.peak_lr = 0.01;
  std::vector<std::int64_t> seen;
  run_training(p, c, constant_schedule(7, 0.01), 7, 1,
               [&seen](const StepView& v) { seen.push_back(v.step); });
  EXPECT_EQ(seen, (std::vector<std::int64_t>{1, 2, 3, 4, 5, 6, 7}));
}

TEST(TraceCsv, PinnedLayout) {
  TrainTrace t;
  t.block_names = {"a", "b"};
  t.rows = {{1, 2.5, 0.125, {1.0, 0.5}}, {2, 0.1, 0.25, {0.0, 3.0}}};
  t.final_params_digest = "00000000deadbeef";
  std::ostringstream out;
  write_trace_csv(out, t);
  EXPECT_EQ(out.str(),
            "# schema: scale_opt.trace/1\n"
            "step,loss,lr,a_gradnorm,b_gradnorm\n"
            "1,2.5,0.125,1,0.5\n"
            "2,0.10000000000000001,0.25,0,3\n"
            "# diverged=0 final_params_digest=00000000deadbeef\n");
}

TEST(TraceCsv, DigestTracksBits) {
  Params a{{"w", BlockRole::OutputHead, Matrix::from_rows({{1.0, 2.0}})}};
  Params b = a;
  EXPECT_EQ(params_digest(a), params_digest(b));
  EXPECT_EQ(params_digest(a).size(), 16u);
  b[0].value(0, 1) = std::nextafter(2.0, 3.0);
  EXPECT_NE(params_digest(a), params_digest(b));
  b = a;
  b[0].name = "v";
  EXPECT_NE(params_digest(a), params_digest(b));
}

TEST(GradCheck, CorruptedGradientFails) {
  const QuadraticProblem p(noiseless());
  Rng rng(4);
  const Params params = p.initial_params(rng);
  const Objective good = p.objective();
  const Objective bad = [good](const Params& theta, std::vector<Matrix>* grads) {
    const double loss = good(theta, grads);
    if (grads != nullptr) (*grads)[1](2, 3) += 0.1;
    return loss;
  };
  EXPECT_TRUE(finite_diff_check(good, params, 1e-9).passed);
  const auto report = finite_diff_check(bad, params, 1e-5);
  EXPECT_FALSE(report.passed);
  EXPECT_LE(report.blocks[0].max_rel_error, 1e-9);
  EXPECT_GT(report.blocks[1].max_rel_error, 1e-3);
}
