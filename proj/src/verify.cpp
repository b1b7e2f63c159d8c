#include "scale/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "scale/diagnostics.hpp"
#include "scale/problems.hpp"
#include "scale/rng.hpp"
#include "scale/svd.hpp"
#include "scale/training.hpp"

namespace scale {

namespace {

constexpr NormKind kExactKinds[] = {NormKind::Sign, NormKind::ColumnWise, NormKind::RowWise,
                                    NormKind::SingularValue};

template <class Body>
SuiteResult timed(std::string name, Body body) {
  const auto start = std::chrono::steady_clock::now();
  SuiteResult r{std::move(name), false, {}, 0.0};
  std::ostringstream detail;
  r.passed = body(detail);
  r.detail = detail.str();
  r.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

Matrix random_small(Rng& rng) {
  const std::size_t rows = 2 + rng.below(7);
  const std::size_t cols = 3 + rng.below(6);
  return rng.normal_matrix(rows, cols);
}

// U diag(s) V^T with random orthogonal factors and s uniform on [lo, hi].
Matrix with_spectrum(std::size_t m, std::size_t n, double lo, double hi, Rng& rng) {
  const std::size_t r = std::min(m, n);
  const Matrix u = svd_exact(rng.normal_matrix(m, r)).u;
  const Matrix vt = svd_exact(rng.normal_matrix(r, n)).vt;
  std::vector<double> s(r);
  for (double& v : s) v = rng.uniform(lo, hi);
  return matmul(matmul(u, Matrix::diagonal(s)), vt);
}

}  // namespace

bool VerifyReport::passed() const {
  return std::all_of(suites.begin(), suites.end(), [](const auto& s) { return s.passed; });
}

SuiteResult verify_lmo_optimality(const VerifyOptions& o) {
  return timed("lmo_optimality", [&](std::ostream& detail) {
    Rng rng = Rng(o.seed).split(11);
    std::size_t failures = 0;
    for (NormKind kind : kExactKinds) {
      for (std::size_t i = 0; i < o.lmo_matrices; ++i) {
        const Matrix g = random_small(rng);
        if (!lmo_optimality_check(kind, g, static_cast<std::int64_t>(o.lmo_trials), rng, o.ns)) {
          ++failures;
        }
      }
    }
    detail << failures << " failures over " << 4 * o.lmo_matrices << " matrices x "
           << o.lmo_trials << " directions";
    return failures == 0;
  });
}

SuiteResult verify_duality(const VerifyOptions& o) {
  return timed("duality", [&](std::ostream& detail) {
    Rng rng = Rng(o.seed).split(12);
    double worst = 0.0;
    for (NormKind kind : kExactKinds) {
      for (std::size_t i = 0; i < o.lmo_matrices; ++i) {
        const Matrix g = random_small(rng);
        const double gap = std::abs(inner_product(g, normalize(kind, g, o.ns)) - dual_norm(kind, g));
        worst = std::max(worst, gap);
      }
    }
    detail << "max |<g, D> - ||g||_*| = " << worst;
    return worst <= 1e-9;
  });
}

SuiteResult verify_orthogonality(const VerifyOptions& o) {
  return timed("orthogonality", [&](std::ostream& detail) {
    Rng rng = Rng(o.seed).split(13);
    double exact_worst = 0.0;
    for (std::size_t n : {2, 3, 5, 8, 16, 33, 64, 96}) {
      for (std::size_t i = 0; i < o.ortho_matrices; ++i) {
        const Matrix d = normalize(NormKind::SingularValue, rng.normal_matrix(n, n));
        const Matrix dtd = matmul(transpose(d), d);
        exact_worst = std::max(exact_worst, frobenius_norm(dtd - Matrix::identity(n)));
      }
    }
    double sv_lo = 1e300;
    double sv_hi = 0.0;
    double dist_ratio = 0.0;
    const std::pair<std::size_t, std::size_t> shapes[] = {{4, 4},  {8, 8},  {16, 16}, {32, 32},
                                                          {64, 64}, {8, 20}, {20, 8}};
    for (const auto& [m, n] : shapes) {
      for (std::size_t i = 0; i < o.ortho_matrices; ++i) {
        const Matrix g = with_spectrum(m, n, 0.3, 1.0, rng);
        const Matrix d = normalize(NormKind::SingularValueNS, g, o.ns);
        const auto sv = svd_exact(d).sigma;
        sv_lo = std::min(sv_lo, sv.back());
        sv_hi = std::max(sv_hi, sv.front());
        const double r = static_cast<double>(std::min(m, n));
        dist_ratio = std::max(dist_ratio,
                              frobenius_norm(d - orthogonalize_exact(g)) / std::sqrt(r));
      }
    }
    detail << "exact max ||D^T D - I||_F = " << exact_worst << "; NS singular values in ["
           << sv_lo << ", " << sv_hi << "], max ||D - UV^T||_F / sqrt(r) = " << dist_ratio;
    return exact_worst <= 1e-8 && sv_lo >= 0.3 && sv_hi <= 1.5 && dist_ratio <= 0.35;
  });
}

SuiteResult verify_gradients(const VerifyOptions& o) {
  return timed("gradient_check", [&](std::ostream& detail) {
    MlpSpec spec;
    spec.input_dim = 8;
    spec.hidden = {12, 10};
    spec.classes = 16;
    spec.batch = 16;
    spec.dataset_size = 256;
    const MlpProblem mlp(spec);
    double mlp_worst = 0.0;
    for (std::size_t i = 0; i < o.grad_inits; ++i) {
      Rng rng = Rng(o.seed + i).split(14);
      const auto report = finite_diff_check(mlp, mlp.initial_params(rng), 1e-5);
      for (const auto& b : report.blocks) mlp_worst = std::max(mlp_worst, b.max_rel_error);
    }

    NoisyQuadratic q;
    q.layers = {{"embed", BlockRole::Embedding, 3, 4, 0.5, 0.0},
                {"hidden", BlockRole::Hidden, 4, 4, 2.0, 0.0},
                {"head", BlockRole::OutputHead, 4, 5, 1.0, 0.0}};
    const QuadraticProblem quad(q);
    Rng rng = Rng(o.seed).split(15);
    const auto qreport = finite_diff_check(quad, quad.initial_params(rng), 1e-9);
    double quad_worst = 0.0;
    for (const auto& b : qreport.blocks) quad_worst = std::max(quad_worst, b.max_rel_error);

    detail << "mlp max rel error " << mlp_worst << " over " << o.grad_inits
           << " inits; quadratic " << quad_worst;
    return mlp_worst <= 1e-5 && qreport.passed;
  });
}

SuiteResult verify_ema_law(const VerifyOptions& o) {
  return timed("ema_law", [&](std::ostream& detail) {
    Rng rng = Rng(o.seed).split(16);
    bool ok = true;
    constexpr double sigma2 = 1.0;
    for (double beta : {0.5, 0.9, 0.99}) {
      const auto mc = ema_variance_monte_carlo(beta, sigma2, o.ema_steps, o.ema_replicas, rng);
      const double law = ema_variance_law(beta, sigma2, o.ema_steps);
      const double z = (mc.mean - law) / mc.std_error;
      detail << "beta=" << beta << " z=" << z << "; ";
      ok = ok && std::abs(z) <= 3.0;
    }
    return ok;
  });
}

VerifyReport run_verify(const VerifyOptions& options) {
  VerifyReport report;
  report.suites.push_back(verify_lmo_optimality(options));
  report.suites.push_back(verify_duality(options));
  report.suites.push_back(verify_orthogonality(options));
  report.suites.push_back(verify_gradients(options));
  report.suites.push_back(verify_ema_law(options));
  return report;
}

void print_verify_report(std::ostream& out, const VerifyReport& report) {
  char buf[32];
  for (const auto& s : report.suites) {
    std::snprintf(buf, sizeof buf, "%.2fs", s.seconds);
    out << (s.passed ? "[PASS] " : "[FAIL] ") << s.name << " (" << buf << "): " << s.detail
        << "\n";
  }
  out << (report.passed() ? "verify: all suites passed" : "verify: FAILED") << "\n";
}

}  // namespace scale
