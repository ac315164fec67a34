#include "ledgercast/tune.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ledgercast/errors.hpp"
#include "ledgercast/rng.hpp"

namespace ledgercast::tune {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clamp01(double u) { return std::min(1.0, std::max(0.0, u)); }

// Number of unit-cube coordinates a dimension occupies when sampling.
// Every dimension samples from one coordinate; categoricals expand to
// one-hot only inside the surrogate.
std::size_t unit_dims(const ParamSpace& space) { return space.dimensions.size(); }

std::size_t kernel_dims(const ParamSpace& space) {
    std::size_t n = 0;
    for (const auto& d : space.dimensions) {
        n += d.kind == DimKind::categorical ? d.choices.size() : 1;
    }
    return n;
}

double dim_value_from_unit(const Dimension& d, double u) {
    u = clamp01(u);
    switch (d.kind) {
    case DimKind::continuous:
        return d.lo + u * (d.hi - d.lo);
    case DimKind::integer: {
        double v = static_cast<double>(std::llround(d.lo + u * (d.hi - d.lo)));
        return std::min(d.hi, std::max(d.lo, v));
    }
    case DimKind::categorical: {
        auto k = static_cast<double>(d.choices.size());
        auto idx = static_cast<double>(std::min<std::size_t>(
            d.choices.size() - 1, static_cast<std::size_t>(u * k)));
        return idx;
    }
    }
    return 0.0;
}

Params params_from_unit(const ParamSpace& space, const std::vector<double>& u) {
    Params p;
    for (std::size_t i = 0; i < space.dimensions.size(); ++i) {
        const auto& d = space.dimensions[i];
        p[d.name] = dim_value_from_unit(d, u[i]);
    }
    return p;
}

// Snaps an externally supplied point into the box, rounding integer
// dimensions and clamping categorical indices.
Params snap_to_space(const ParamSpace& space, const Params& raw) {
    Params p;
    for (const auto& d : space.dimensions) {
        auto it = raw.find(d.name);
        if (it == raw.end()) {
            throw ValidationError("optimize: first_trial missing dimension '" + d.name + "'");
        }
        double v = it->second;
        switch (d.kind) {
        case DimKind::continuous:
            v = std::min(d.hi, std::max(d.lo, v));
            break;
        case DimKind::integer:
            v = static_cast<double>(std::llround(v));
            v = std::min(d.hi, std::max(d.lo, v));
            break;
        case DimKind::categorical: {
            auto last = static_cast<double>(d.choices.size() - 1);
            v = std::min(last, std::max(0.0, std::floor(v)));
            break;
        }
        }
        p[d.name] = v;
    }
    return p;
}

// Surrogate coordinates of an evaluated point: continuous/integer values
// normalized to [0,1] (constant 0.5 for point intervals), categoricals
// one-hot.
Eigen::VectorXd kernel_coords(const ParamSpace& space, const Params& params) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(kernel_dims(space)));
    Eigen::Index at = 0;
    for (const auto& d : space.dimensions) {
        const double v = params.at(d.name);
        if (d.kind == DimKind::categorical) {
            for (std::size_t c = 0; c < d.choices.size(); ++c) {
                x[at++] = (static_cast<std::size_t>(v) == c) ? 1.0 : 0.0;
            }
        } else {
            x[at++] = d.hi > d.lo ? (v - d.lo) / (d.hi - d.lo) : 0.5;
        }
    }
    return x;
}

// ---------------------------------------------------------------------------
// Gaussian-process surrogate
// ---------------------------------------------------------------------------

struct Gp {
    Eigen::MatrixXd x;            // rows = finite trials, cols = kernel dims
    Eigen::VectorXd z;            // standardized losses
    Eigen::VectorXd inv_ls_sq;    // 1 / lengthscale^2 per kernel dim
    double noise = 1e-2;
    Eigen::LLT<Eigen::MatrixXd> chol;
    Eigen::VectorXd alpha;
    double best_z = 0.0;

    double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
        const Eigen::VectorXd diff = a - b;
        return std::exp(-0.5 * diff.cwiseProduct(diff).dot(inv_ls_sq));
    }

    void mean_std(const Eigen::VectorXd& q, double& mu, double& sigma) const {
        const auto n = x.rows();
        Eigen::VectorXd ks(n);
        for (Eigen::Index i = 0; i < n; ++i) ks[i] = kernel(q, x.row(i).transpose());
        mu = ks.dot(alpha);
        const Eigen::VectorXd v = chol.matrixL().solve(ks);
        const double var = std::max(1e-12, 1.0 + noise * noise - v.squaredNorm());
        sigma = std::sqrt(var);
    }
};

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x, const Eigen::VectorXd& inv_ls_sq,
                              double noise) {
    const auto n = x.rows();
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = 1.0 + noise * noise + 1e-8;
        for (Eigen::Index j = 0; j < i; ++j) {
            const Eigen::VectorXd diff = x.row(i) - x.row(j);
            const double v = std::exp(-0.5 * diff.cwiseProduct(diff).dot(inv_ls_sq));
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

double log_marginal(const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
                    const Eigen::VectorXd& ls, double noise) {
    const Eigen::VectorXd inv_ls_sq = ls.cwiseProduct(ls).cwiseInverse();
    const Eigen::MatrixXd k = kernel_matrix(x, inv_ls_sq, noise);
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() != Eigen::Success) return -kInf;
    const Eigen::VectorXd a = llt.solve(z);
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) log_det += std::log(llt.matrixL()(i, i));
    const double n = static_cast<double>(x.rows());
    return -0.5 * z.dot(a) - log_det - 0.5 * n * std::log(2.0 * 3.141592653589793);
}

// Fits lengthscales and noise by marginal likelihood: a few multi-start
// coordinate sweeps over a factor grid. Cheap at tuning budgets.
Gp fit_gp(const Eigen::MatrixXd& x, const Eigen::VectorXd& z) {
    const Eigen::Index dims = x.cols();
    const double starts[] = {0.3, 1.0, 3.0};
    const double factors[] = {0.25, 0.5, 1.0, 2.0, 4.0};
    const double noises[] = {1e-3, 1e-2, 1e-1, 0.3};

    Eigen::VectorXd best_ls = Eigen::VectorXd::Ones(dims);
    double best_noise = 1e-2;
    double best_ll = -kInf;

    for (double s : starts) {
        Eigen::VectorXd ls = Eigen::VectorXd::Constant(dims, s);
        double noise = 1e-2;
        double ll = log_marginal(x, z, ls, noise);
        for (int sweep = 0; sweep < 2; ++sweep) {
            for (double cand : noises) {
                const double trial_ll = log_marginal(x, z, ls, cand);
                if (trial_ll > ll) {
                    ll = trial_ll;
                    noise = cand;
                }
            }
            for (Eigen::Index d = 0; d < dims; ++d) {
                const double base = ls[d];
                double keep = base;
                for (double f : factors) {
                    ls[d] = std::min(10.0, std::max(0.02, base * f));
                    const double trial_ll = log_marginal(x, z, ls, noise);
                    if (trial_ll > ll) {
                        ll = trial_ll;
                        keep = ls[d];
                    }
                }
                ls[d] = keep;
            }
        }
        if (ll > best_ll) {
            best_ll = ll;
            best_ls = ls;
            best_noise = noise;
        }
    }

    Gp gp;
    gp.x = x;
    gp.z = z;
    gp.inv_ls_sq = best_ls.cwiseProduct(best_ls).cwiseInverse();
    gp.noise = best_noise;
    gp.chol.compute(kernel_matrix(x, gp.inv_ls_sq, gp.noise));
    gp.alpha = gp.chol.solve(z);
    gp.best_z = z.minCoeff();
    return gp;
}

double normal_cdf(double u) { return 0.5 * std::erfc(-u / std::sqrt(2.0)); }
double normal_pdf(double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * 3.141592653589793); }

// Expected improvement for minimization, evaluated at the point the unit
// vector actually maps to (integers rounded first).
double expected_improvement(const Gp& gp, const ParamSpace& space, const std::vector<double>& u) {
    const Params p = params_from_unit(space, u);
    const Eigen::VectorXd q = kernel_coords(space, p);
    double mu = 0.0;
    double sigma = 0.0;
    gp.mean_std(q, mu, sigma);
    const double gap = gp.best_z - mu;
    if (sigma < 1e-12) return std::max(0.0, gap);
    const double t = gap / sigma;
    return gap * normal_cdf(t) + sigma * normal_pdf(t);
}

std::vector<double> propose_ei(const Gp& gp, const ParamSpace& space, Halton& halton, Rng& rng) {
    const std::size_t dims = unit_dims(space);
    std::vector<double> best_u(dims, 0.5);
    double best_ei = -kInf;

    auto consider = [&](const std::vector<double>& u) {
        const double ei = expected_improvement(gp, space, u);
        if (ei > best_ei) {
            best_ei = ei;
            best_u = u;
        }
    };

    for (int i = 0; i < 128; ++i) consider(halton.next());
    std::vector<double> u(dims);
    for (int i = 0; i < 64; ++i) {
        for (auto& v : u) v = rng.uniform();
        consider(u);
    }

    // Local refinement: coordinate-wise hill climbing with shrinking steps.
    for (double step : {0.08, 0.02, 0.005}) {
        for (std::size_t d = 0; d < dims; ++d) {
            for (double dir : {1.0, -1.0}) {
                std::vector<double> cand = best_u;
                cand[d] = clamp01(cand[d] + dir * step);
                consider(cand);
            }
        }
    }
    return best_u;
}

} // namespace

// ---------------------------------------------------------------------------
// ParamSpace
// ---------------------------------------------------------------------------

Dimension Dimension::real(std::string name, double lo, double hi) {
    Dimension d;
    d.name = std::move(name);
    d.kind = DimKind::continuous;
    d.lo = lo;
    d.hi = hi;
    return d;
}

Dimension Dimension::whole(std::string name, int lo, int hi) {
    Dimension d;
    d.name = std::move(name);
    d.kind = DimKind::integer;
    d.lo = lo;
    d.hi = hi;
    return d;
}

Dimension Dimension::pick(std::string name, std::vector<std::string> choices) {
    Dimension d;
    d.name = std::move(name);
    d.kind = DimKind::categorical;
    d.choices = std::move(choices);
    d.hi = d.choices.empty() ? 0.0 : static_cast<double>(d.choices.size() - 1);
    return d;
}

void ParamSpace::validate() const {
    if (dimensions.empty()) throw ValidationError("ParamSpace: no dimensions");
    for (const auto& d : dimensions) {
        if (d.name.empty()) throw ValidationError("ParamSpace: unnamed dimension");
        if (d.kind == DimKind::categorical) {
            if (d.choices.empty()) {
                throw ValidationError("ParamSpace: dimension '" + d.name + "' has no choices");
            }
        } else {
            if (!std::isfinite(d.lo) || !std::isfinite(d.hi) || d.lo > d.hi) {
                throw ValidationError("ParamSpace: dimension '" + d.name + "' has invalid bounds");
            }
        }
        std::size_t seen = 0;
        for (const auto& other : dimensions) {
            if (other.name == d.name) ++seen;
        }
        if (seen != 1) throw ValidationError("ParamSpace: duplicate dimension '" + d.name + "'");
    }
}

const Dimension* ParamSpace::find(const std::string& name) const {
    for (const auto& d : dimensions) {
        if (d.name == name) return &d;
    }
    return nullptr;
}

std::string choice_of(const ParamSpace& space, const Params& params, const std::string& name) {
    const Dimension* d = space.find(name);
    if (d == nullptr || d->kind != DimKind::categorical) {
        throw ValidationError("choice_of: '" + name + "' is not a categorical dimension");
    }
    auto it = params.find(name);
    if (it == params.end()) throw ValidationError("choice_of: params missing '" + name + "'");
    auto idx = static_cast<std::size_t>(it->second);
    if (idx >= d->choices.size()) throw ValidationError("choice_of: index out of range for '" + name + "'");
    return d->choices[idx];
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

TuneResult optimize(const Objective& objective, const ParamSpace& space, int budget,
                    std::uint64_t seed, SearchMode mode, const std::optional<Params>& first_trial) {
    space.validate();
    if (budget < 1) throw ValidationError("optimize: budget must be >= 1");
    if (!objective) throw ValidationError("optimize: objective is empty");

    const std::size_t dims = unit_dims(space);
    const int n_init = std::min(budget, std::max(5, budget / 5));
    Halton halton(dims);
    Rng rng(seed);

    TuneResult result;
    result.seed = seed;
    result.budget = budget;
    result.best_loss = kInf;

    std::vector<Eigen::VectorXd> finite_x;
    std::vector<double> finite_y;

    for (int trial = 0; trial < budget; ++trial) {
        Params params;
        if (trial == 0 && first_trial.has_value()) {
            params = snap_to_space(space, *first_trial);
        } else if (trial < n_init || mode == SearchMode::random_search) {
            std::vector<double> u(dims);
            if (mode == SearchMode::random_search && trial >= n_init) {
                for (auto& v : u) v = rng.uniform();
            } else {
                u = halton.next();
            }
            params = params_from_unit(space, u);
        } else {
            // Surrogate-guided proposal; falls back to the quasi-random
            // stream until at least two informative observations exist.
            double spread = 0.0;
            if (finite_y.size() >= 2) {
                const auto [lo, hi] = std::minmax_element(finite_y.begin(), finite_y.end());
                spread = *hi - *lo;
            }
            if (finite_y.size() < 2 || spread <= 0.0) {
                params = params_from_unit(space, halton.next());
            } else {
                const auto n = static_cast<Eigen::Index>(finite_y.size());
                Eigen::MatrixXd x(n, finite_x.front().size());
                Eigen::VectorXd y(n);
                for (Eigen::Index i = 0; i < n; ++i) {
                    x.row(i) = finite_x[static_cast<std::size_t>(i)].transpose();
                    y[i] = finite_y[static_cast<std::size_t>(i)];
                }
                const double mean = y.mean();
                const double sd = std::sqrt((y.array() - mean).square().sum() /
                                            static_cast<double>(n));
                const Eigen::VectorXd z = (y.array() - mean) / sd;
                const Gp gp = fit_gp(x, z);
                params = params_from_unit(space, propose_ei(gp, space, halton, rng));
            }
        }

        double loss = kInf;
        try {
            loss = objective(params);
        } catch (const std::exception&) {
            loss = kInf;
        }
        if (!std::isfinite(loss)) loss = kInf;

        result.history.push_back(Trial{params, loss});
        if (loss < result.best_loss) {
            result.best_loss = loss;
            result.best_params = params;
        }
        if (std::isfinite(loss)) {
            finite_x.push_back(kernel_coords(space, params));
            finite_y.push_back(loss);
        }
    }

    if (result.best_params.empty()) result.best_params = result.history.front().params;
    return result;
}

std::string history_csv(const ParamSpace& space, const TuneResult& result) {
    std::ostringstream out;
    out << "trial_index";
    for (const auto& d : space.dimensions) out << ',' << d.name;
    out << ",loss\n";
    out.precision(17);
    for (std::size_t i = 0; i < result.history.size(); ++i) {
        const auto& trial = result.history[i];
        out << i;
        for (const auto& d : space.dimensions) {
            out << ',';
            const double v = trial.params.at(d.name);
            if (d.kind == DimKind::categorical) {
                out << d.choices[static_cast<std::size_t>(v)];
            } else if (d.kind == DimKind::integer) {
                out << static_cast<long long>(v);
            } else {
                out << v;
            }
        }
        out << ',';
        if (std::isfinite(trial.loss)) {
            out << trial.loss;
        } else {
            out << "inf";
        }
        out << '\n';
    }
    return out.str();
}

} // namespace ledgercast::tune
