#pragma once

// Sampling-based falsification of the second-order surjectivity conditions.
//
// Every estimate here is a one-sided bound over a seeded sample: C_est is a max,
// K_est a min. Nothing here certifies that a condition holds; a report can only
// say that the sample did not falsify it, with the observed margins.

#include "hlift/gramian.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace hlift {

struct SamplingPlan {
    double R = 1.0;
    std::vector<double> radii{1.0, 2.0, 4.0, 8.0};
    int per_radius = 8;
    int z_samples = 4;
    int v_samples = 8;
    std::uint64_t seed = 1;

    void validate() const {
        require(std::isfinite(R) && R > 0.0, ErrorKind::Configuration, "check.R must be positive");
        require(!radii.empty(), ErrorKind::Configuration, "check.radii must not be empty");
        for (std::size_t i = 0; i < radii.size(); ++i) {
            require(radii[i] >= R, ErrorKind::Configuration, "check.radii must all be >= check.R");
            require(i == 0 || radii[i] > radii[i - 1], ErrorKind::Configuration, "check.radii must be increasing");
        }
        require(per_radius >= 1 && z_samples >= 1 && v_samples >= 1, ErrorKind::Configuration,
                "check sample counts must be >= 1");
    }
};

/// xi(s) = c s^p; the integral of 1/xi to infinity diverges iff p <= 1.
struct PowerLawXi {
    double c = 1.0;
    double p = 1.0;

    void validate() const {
        require(std::isfinite(c) && c > 0.0, ErrorKind::Configuration, "check.xi_c must be positive");
        if (!(p <= 1.0)) {
            throw Error(ErrorKind::InvalidXi, "xi(s) = c s^p needs p <= 1 for the integral of ds/xi(s) to diverge (p = " +
                                                  std::to_string(p) + ")");
        }
    }
    [[nodiscard]] double operator()(double s) const { return c * std::pow(s, p); }
};

namespace sampling {

/// splitmix64 finalizer, used to derive independent per-sample streams from one seed.
[[nodiscard]] inline std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

[[nodiscard]] inline std::uint64_t substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return mix(mix(seed ^ mix(a)) ^ mix(b + 0x1234567ull));
}

/// Uniform on the codomain unit sphere.
[[nodiscard]] inline Vector unit_codomain(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> nd;
    Vector z(n);
    do {
        for (Eigen::Index i = 0; i < n; ++i) z[i] = nd(rng);
    } while (z.norm() == 0.0);
    return z.normalized();
}

/// Uniform on {|u|_X = r}: a Euclidean Gaussian mapped through W^{-1/2}, an isometry onto X.
[[nodiscard]] inline Vector domain_sphere(std::mt19937_64& rng, const MapOracle& map, double r) {
    std::normal_distribution<double> nd;
    Vector g(map.dim_domain());
    do {
        for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = nd(rng);
    } while (g.norm() == 0.0);
    const Vector u = g.cwiseQuotient(map.weights().cwiseSqrt());
    return u * (r / map.norm(u));
}

}  // namespace sampling

/// Lower estimate of sup |z*d^2F|_u(v, w)| over unit z, v, w: random sampling, then 20 alternating
/// power sweeps (v <- A_z v / |A_z v|, z <- grad_z) from the best sample.
[[nodiscard]] inline double estimate_bilinear_norm(const MapOracle& map, const Vector& u, int z_count, int v_count,
                                                   std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Eigen::Index n = map.dim_codomain();
    double best = 0.0;
    Vector best_z = Vector::Unit(n, 0);
    Vector best_v = sampling::domain_sphere(rng, map, 1.0);
    for (int iz = 0; iz < z_count; ++iz) {
        const Vector z = sampling::unit_codomain(rng, n);
        for (int iv = 0; iv < v_count; ++iv) {
            const Vector v = sampling::domain_sphere(rng, map, 1.0);
            const Vector w = sampling::domain_sphere(rng, map, 1.0);
            const double val = std::abs(map.bilinear_second(u, z, v, w));
            if (val > best) {
                best = val;
                best_z = z;
                best_v = v;
            }
        }
    }
    Vector z = best_z;
    Vector v = best_v;
    for (int sweep = 0; sweep < 20; ++sweep) {
        const Vector av = map.second_directional(u, z, v);
        const double nrm = map.norm(av);
        if (!(nrm > 0.0) || !std::isfinite(nrm)) break;
        const Vector w = av / nrm;
        best = std::max(best, std::abs(map.bilinear_second(u, z, v, w)));
        v = w;
        Vector grad(n);
        for (Eigen::Index k = 0; k < n; ++k) grad[k] = map.bilinear_second(u, Vector::Unit(n, k), v, v);
        if (grad.norm() > 0.0) {
            z = grad.normalized();
            best = std::max(best, std::abs(map.bilinear_second(u, z, v, v)));
        }
    }
    return best;
}

/// |z*d^2F(phi_z, phi_z)| / |phi_z|_X^2, or nullopt when |phi_z|_X <= 1e-12.
[[nodiscard]] inline std::optional<double> coercivity_ratio(const MapOracle& map, const Vector& u, const Vector& z) {
    const Vector phi = map.apply_adjoint(u, z);
    const double pn2 = map.inner(phi, phi);
    if (!(std::sqrt(pn2) > 1e-12)) return std::nullopt;
    return std::abs(map.bilinear_second(u, z, phi, phi)) / pn2;
}

struct XiSample {
    double radius = 0.0;  // |u|_X
    double phi_norm = 0.0;
    double curvature = 0.0;  // |z*d^2F(phi_z, phi_z)|
    double margin = 0.0;  // |phi| |curvature| xi(|u|)^2 / |phi|^2, >= 1 required
};

[[nodiscard]] inline std::optional<XiSample> xi_sample(const MapOracle& map, const Vector& u, const Vector& z,
                                                       const PowerLawXi& xi) {
    const Vector phi = map.apply_adjoint(u, z);
    const double pn = map.norm(phi);
    if (!(pn > 1e-12)) return std::nullopt;
    XiSample s;
    s.radius = map.norm(u);
    s.phi_norm = pn;
    s.curvature = std::abs(map.bilinear_second(u, z, phi, phi));
    const double x = xi(s.radius);
    s.margin = pn * s.curvature * x * x / (pn * pn);
    return s;
}

struct XiSplit {
    double K1 = 0.0;
    double K2 = 0.0;
    double alpha = 0.5;
    bool holds = false;  // K1 > 0 and K2 > 0 at the chosen alpha
};

/// Best (K1, K2, alpha) over alpha in {0.01, ..., 0.99} maximizing min(K1, K2), where
/// K1 = min |curv| |u|^{1-alpha} / |phi|^2 and K2 = min |phi| |u|^{1+alpha}.
[[nodiscard]] inline XiSplit fit_xi_split(const std::vector<XiSample>& samples) {
    XiSplit best;
    if (samples.empty()) return best;
    double best_score = -1.0;
    for (int k = 1; k <= 99; ++k) {
        const double alpha = k / 100.0;
        double k1 = std::numeric_limits<double>::infinity();
        double k2 = std::numeric_limits<double>::infinity();
        for (const auto& s : samples) {
            k1 = std::min(k1, s.curvature * std::pow(s.radius, 1.0 - alpha) / (s.phi_norm * s.phi_norm));
            k2 = std::min(k2, s.phi_norm * std::pow(s.radius, 1.0 + alpha));
        }
        const double score = std::min(k1, k2);
        if (score > best_score) {
            best_score = score;
            best = {k1, k2, alpha, k1 > 0.0 && k2 > 0.0};
        }
    }
    return best;
}

struct XiReport {
    std::vector<XiSample> samples;
    double min_margin = std::numeric_limits<double>::infinity();
    bool pass = false;
    int skipped = 0;
    XiSplit split;
};

[[nodiscard]] inline XiReport xi_condition_check(const MapOracle& map, const SamplingPlan& plan, const PowerLawXi& xi) {
    xi.validate();
    plan.validate();
    XiReport rep;
    for (std::size_t ir = 0; ir < plan.radii.size(); ++ir) {
        for (int j = 0; j < plan.per_radius; ++j) {
            std::mt19937_64 rng(sampling::substream(plan.seed, ir, static_cast<std::uint64_t>(j)));
            const Vector u = sampling::domain_sphere(rng, map, plan.radii[ir]);
            for (int iz = 0; iz < plan.z_samples; ++iz) {
                const Vector z = sampling::unit_codomain(rng, map.dim_codomain());
                auto s = xi_sample(map, u, z, xi);
                if (!s) {
                    ++rep.skipped;
                    continue;
                }
                rep.min_margin = std::min(rep.min_margin, s->margin);
                rep.samples.push_back(*s);
            }
        }
    }
    rep.pass = !rep.samples.empty() && rep.min_margin >= 1.0;
    rep.split = fit_xi_split(rep.samples);
    return rep;
}

struct ShellGrowth {
    double radius = 0.0;
    double max_inverse_norm = 0.0;  // max over nonsingular samples of 1 / lambda_1
    int samples = 0;
    int singular = 0;
};

struct GrowthReport {
    std::vector<ShellGrowth> shells;
    double slope = std::numeric_limits<double>::quiet_NaN();
    double intercept = std::numeric_limits<double>::quiet_NaN();
    bool pass = false;
    int singular_samples = 0;
};

/// Least-squares fit of log(max 1/lambda_1) against log(1 + r) over shells with a nonsingular sample.
inline void fit_growth(GrowthReport& rep, double slope_tol) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& sh : rep.shells) {
        if (sh.samples > sh.singular && sh.max_inverse_norm > 0.0) {
            xs.push_back(std::log1p(sh.radius));
            ys.push_back(std::log(sh.max_inverse_norm));
        }
    }
    if (xs.size() == 1) {
        rep.slope = 0.0;
        rep.intercept = ys[0];
    } else if (xs.size() >= 2) {
        const double m = static_cast<double>(xs.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sx += xs[i];
            sy += ys[i];
            sxx += xs[i] * xs[i];
            sxy += xs[i] * ys[i];
        }
        const double den = m * sxx - sx * sx;
        rep.slope = den != 0.0 ? (m * sxy - sx * sy) / den : 0.0;
        rep.intercept = (sy - rep.slope * sx) / m;
    }
    rep.pass = std::isfinite(rep.slope) && std::isfinite(rep.intercept) && rep.slope <= 2.0 + slope_tol;
}

[[nodiscard]] inline GrowthReport gramian_inverse_growth(const MapOracle& map, const SamplingPlan& plan,
                                                         double slope_tol = 0.1,
                                                         double singular_factor = kSingularFactor) {
    plan.validate();
    GrowthReport rep;
    for (std::size_t ir = 0; ir < plan.radii.size(); ++ir) {
        ShellGrowth sh;
        sh.radius = plan.radii[ir];
        for (int j = 0; j < plan.per_radius; ++j) {
            std::mt19937_64 rng(sampling::substream(plan.seed, ir, static_cast<std::uint64_t>(j)));
            const Vector u = sampling::domain_sphere(rng, map, plan.radii[ir]);
            const GramianSpectrum spec = spectral_decompose(gramian(map, u));
            ++sh.samples;
            if (!(spec.lambda_min() > singular_threshold(spec, singular_factor))) {
                ++sh.singular;
                continue;
            }
            sh.max_inverse_norm = std::max(sh.max_inverse_norm, 1.0 / spec.lambda_min());
        }
        rep.singular_samples += sh.singular;
        rep.shells.push_back(sh);
    }
    fit_growth(rep, slope_tol);
    return rep;
}

// ---------------------------------------------------------------------------
// Aggregated report
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& known_conditions() {
    static const std::vector<std::string> names{"A", "nonsingular", "eq1", "eq2", "eq1_2", "growth"};
    return names;
}

struct CheckThresholds {
    double lambda0 = 1e-6;
    std::optional<double> C_max;  // eq1 is only falsifiable against an explicit bound
    double K_min = 1e-6;
    double slope_tol = 0.1;
    PowerLawXi xi;
    double singular_factor = kSingularFactor;
    std::set<std::string> conditions{known_conditions().begin(), known_conditions().end()};

    void validate() const {
        require(std::isfinite(lambda0) && lambda0 > 0.0, ErrorKind::Configuration, "check.lambda0 must be positive");
        require(std::isfinite(K_min) && K_min >= 0.0, ErrorKind::Configuration, "check.K_min must be >= 0");
        require(slope_tol >= 0.0, ErrorKind::Configuration, "check.slope_tol must be >= 0");
        for (const auto& c : conditions) {
            bool ok = false;
            for (const auto& k : known_conditions()) ok = ok || k == c;
            require(ok, ErrorKind::Configuration, "check.conditions: unknown condition '" + c + "'");
        }
        if (conditions.count("eq2") != 0) xi.validate();
    }
};

struct ShellRow {
    double radius = 0.0;
    int samples = 0;
    int singular = 0;
    int degenerate_phi = 0;
    double C_max = 0.0;
    double K_min = std::numeric_limits<double>::infinity();
    double xi_margin_min = std::numeric_limits<double>::infinity();
    double lambda2_min = std::numeric_limits<double>::infinity();
    double max_inverse_gramian = 0.0;
};

struct ConditionVerdict {
    bool checked = false;
    bool falsified = false;
    std::string detail;
};

struct HypothesisReport {
    std::uint64_t seed = 0;
    int u_samples = 0;
    int z_samples_per_u = 0;
    int v_samples = 0;
    double C_est = 0.0;
    double K_est = std::numeric_limits<double>::infinity();
    int coercivity_samples = 0;
    int skipped_degenerate_phi = 0;
    GrowthReport growth;
    double xi_margin = std::numeric_limits<double>::infinity();
    XiSplit xi_split;
    double assumptionA_margin = std::numeric_limits<double>::infinity();  // min over samples of lambda_2 - lambda0
    bool assumptionA_pass = true;
    int singular_samples = 0;
    std::vector<ShellRow> shells;
    std::map<std::string, ConditionVerdict> verdicts;

    [[nodiscard]] bool any_falsified() const {
        for (const auto& [name, v] : verdicts) {
            if (v.checked && v.falsified) return true;
        }
        return false;
    }
};

[[nodiscard]] inline HypothesisReport check_report(const MapOracle& map, const SamplingPlan& plan,
                                                   const CheckThresholds& th) {
    plan.validate();
    th.validate();
    const bool want_xi = th.conditions.count("eq2") != 0;
    HypothesisReport rep;
    rep.seed = plan.seed;
    rep.z_samples_per_u = plan.z_samples;
    rep.v_samples = plan.v_samples;
    std::vector<XiSample> xi_samples;
    const Eigen::Index n = map.dim_codomain();

    for (std::size_t ir = 0; ir < plan.radii.size(); ++ir) {
        ShellRow row;
        row.radius = plan.radii[ir];
        ShellGrowth gshell;
        gshell.radius = row.radius;
        for (int j = 0; j < plan.per_radius; ++j) {
            std::mt19937_64 rng(sampling::substream(plan.seed, ir, static_cast<std::uint64_t>(j)));
            const Vector u = sampling::domain_sphere(rng, map, row.radius);
            ++row.samples;
            ++rep.u_samples;
            ++gshell.samples;

            const GramianSpectrum spec = spectral_decompose(gramian(map, u));
            if (n > 1) {
                row.lambda2_min = std::min(row.lambda2_min, spec.lambdas[1]);
                rep.assumptionA_margin = std::min(rep.assumptionA_margin, spec.lambdas[1] - th.lambda0);
            }
            if (!(spec.lambda_min() > singular_threshold(spec, th.singular_factor))) {
                ++row.singular;
                ++gshell.singular;
            } else {
                const double inv = 1.0 / spec.lambda_min();
                row.max_inverse_gramian = std::max(row.max_inverse_gramian, inv);
                gshell.max_inverse_norm = std::max(gshell.max_inverse_norm, inv);
            }

            const double c = estimate_bilinear_norm(map, u, plan.z_samples, plan.v_samples,
                                                    sampling::substream(plan.seed ^ 0xC0FFEEull, ir,
                                                                        static_cast<std::uint64_t>(j)));
            row.C_max = std::max(row.C_max, c);

            for (int iz = 0; iz < plan.z_samples; ++iz) {
                const Vector z = sampling::unit_codomain(rng, n);
                const auto ratio = coercivity_ratio(map, u, z);
                if (!ratio) {
                    ++row.degenerate_phi;
                    continue;
                }
                ++rep.coercivity_samples;
                row.K_min = std::min(row.K_min, *ratio);
                if (want_xi) {
                    if (auto xs = xi_sample(map, u, z, th.xi)) {
                        row.xi_margin_min = std::min(row.xi_margin_min, xs->margin);
                        xi_samples.push_back(*xs);
                    }
                }
            }
        }
        rep.C_est = std::max(rep.C_est, row.C_max);
        rep.K_est = std::min(rep.K_est, row.K_min);
        rep.xi_margin = std::min(rep.xi_margin, row.xi_margin_min);
        rep.singular_samples += row.singular;
        rep.skipped_degenerate_phi += row.degenerate_phi;
        rep.growth.singular_samples += gshell.singular;
        rep.growth.shells.push_back(gshell);
        rep.shells.push_back(row);
    }
    fit_growth(rep.growth, th.slope_tol);
    rep.assumptionA_pass = !(rep.assumptionA_margin < 0.0);
    if (want_xi) rep.xi_split = fit_xi_split(xi_samples);

    auto verdict = [&](const std::string& name, bool falsified, std::string detail) {
        ConditionVerdict v;
        v.checked = th.conditions.count(name) != 0;
        v.falsified = v.checked && falsified;
        v.detail = std::move(detail);
        rep.verdicts[name] = v;
    };
    verdict("A", !rep.assumptionA_pass,
            n == 1 ? "vacuous for n = 1" : "min lambda_2 - lambda0 = " + std::to_string(rep.assumptionA_margin));
    verdict("nonsingular", rep.singular_samples > 0,
            std::to_string(rep.singular_samples) + " singular samples of " + std::to_string(rep.u_samples));
    verdict("eq1", th.C_max.has_value() && rep.C_est > *th.C_max,
            th.C_max ? "C_est = " + std::to_string(rep.C_est) + " vs C_max = " + std::to_string(*th.C_max)
                     : "no C_max given; C_est = " + std::to_string(rep.C_est));
    verdict("eq1_2", !(rep.K_est > th.K_min), "K_est = " + std::to_string(rep.K_est));
    verdict("eq2", !(rep.xi_margin >= 1.0), "min margin = " + std::to_string(rep.xi_margin));
    verdict("growth", !rep.growth.pass, "slope = " + std::to_string(rep.growth.slope));
    return rep;
}

}  // namespace hlift
