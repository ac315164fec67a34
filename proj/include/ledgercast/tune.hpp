#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ledgercast::tune {

// ---------------------------------------------------------------------------
// Search space
// ---------------------------------------------------------------------------

enum class DimKind { continuous, integer, categorical };

struct Dimension {
    std::string name;
    DimKind kind = DimKind::continuous;
    double lo = 0.0;
    double hi = 0.0;
    std::vector<std::string> choices;

    static Dimension real(std::string name, double lo, double hi);
    static Dimension whole(std::string name, int lo, int hi);
    static Dimension pick(std::string name, std::vector<std::string> choices);
};

// Point intervals (lo == hi) are allowed and pin a dimension to a constant,
// which is the supported way to freeze a parameter while tuning the rest.
struct ParamSpace {
    std::vector<Dimension> dimensions;

    void validate() const;
    const Dimension* find(const std::string& name) const;
};

// A concrete point in the space. Continuous and integer dimensions map to
// their value; categorical dimensions store the choice index.
using Params = std::map<std::string, double>;

// Resolves a categorical dimension of `params` to its choice label.
std::string choice_of(const ParamSpace& space, const Params& params, const std::string& name);

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct Trial {
    Params params;
    double loss = 0.0;
};

enum class SearchMode {
    gp_ei,         // GP surrogate + expected improvement (default)
    random_search, // uniform sampling; first trial still pinned, see below
};

struct TuneResult {
    Params best_params;
    double best_loss = 0.0;
    std::vector<Trial> history; // length == budget, in evaluation order
    std::uint64_t seed = 0;
    int budget = 0;
};

using Objective = std::function<double(const Params&)>;

// Minimizes `objective` over `space` with `budget` evaluations.
//
// The first max(5, budget/5) trials come from a Halton sequence whose first
// point is the centre of the box; remaining trials maximize expected
// improvement under a Gaussian-process surrogate (squared-exponential ARD
// kernel over normalized coordinates, integer dimensions rounded before
// evaluation, categoricals one-hot in surrogate space). Kernel lengthscales
// and noise are refit each round by marginal likelihood over a small
// multi-start grid. Proposals are always inside the box.
//
// When `first_trial` is given it is evaluated as trial 0 (clamped into the
// box), so passing the documented defaults guarantees the tuned loss never
// exceeds the default loss. An objective that throws or returns a non-finite
// value records the trial with +inf loss and the search continues; such
// trials are excluded from the surrogate fit.
//
// SearchMode::random_search keeps trial 0 pinned and draws the rest
// uniformly; it exists for cheap smoke runs where only "no worse than the
// start" matters. Both modes are deterministic given (space, budget, seed).
TuneResult optimize(const Objective& objective, const ParamSpace& space, int budget,
                    std::uint64_t seed, SearchMode mode = SearchMode::gp_ei,
                    const std::optional<Params>& first_trial = std::nullopt);

// Trial history as CSV: trial_index, one column per dimension, loss.
std::string history_csv(const ParamSpace& space, const TuneResult& result);

} // namespace ledgercast::tune
