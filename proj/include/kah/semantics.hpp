#ifndef KAH_SEMANTICS_HPP
#define KAH_SEMANTICS_HPP

#include "kah/expr.hpp"

#include <cstdint>
#include <optional>
#include <set>

namespace kah {

using AtomSet = std::set<Atom>;

/// A language truncated to atoms of size <= size_bound. exact_below_bound
/// says the set equals the true language restricted to that bound.
struct BoundedLanguage {
    AtomSet atoms;
    int size_bound = 0;
    bool exact_below_bound = true;
};

struct Hypothesis {
    ExprPtr lhs;
    ExprPtr rhs;
};
using HypothesisSet = std::vector<Hypothesis>;

/// Which atom sizes an expression's language realises, truncated at a bound.
/// `beyond` records whether sizes above the bound occur.
struct SizeProfile {
    uint64_t mask = 0;  // bit k set <=> some atom of size k (k <= 63)
    bool beyond = false;

    bool has(int k) const { return k >= 0 && k < 64 && (mask >> k) & 1; }
    bool empty() const { return mask == 0 && !beyond; }
    int min_size() const;
    int max_bounded() const;  // largest size <= bound present, -1 if none
};

SizeProfile size_profile(const ExprPtr& e, int bound, const TheoryConfig& th,
                         SizeMetric metric = SizeMetric::Leaves);

/// Exactly { a in [[e]] : size(a) <= bound }, by Kleene iteration over the
/// bounded universe.
BoundedLanguage lang_bounded(const ExprPtr& e, int bound, const TheoryConfig& th,
                             SizeMetric metric = SizeMetric::Leaves);

/// Pointwise lift of a context over a language.
AtomSet apply_context_lang(const Context& c, const AtomSet& l, const TheoryConfig& th);

/// Saturation engine for the hypothesis closure on the bounded universe.
/// Hypotheses whose right-hand language has atoms beyond the work bound are
/// skipped; results computed under such a skip carry the approximate flag
/// (they under-approximate the true closure).
class ClosureEngine {
public:
    ClosureEngine(const TheoryConfig& th, HypothesisSet hyps, int work_bound,
                  SizeMetric metric = SizeMetric::Leaves);

    /// One application of the closure-generating function H.
    AtomSet closure_step(const AtomSet& l) const;
    /// Least fixpoint of X -> L u H(X) inside the bounded universe.
    AtomSet closure(const AtomSet& l) const;

    bool approximate() const { return approximate_; }
    int work_bound() const { return work_bound_; }
    const TheoryConfig& theory() const { return th_; }
    const HypothesisSet& hypotheses() const { return hyps_; }
    SizeMetric metric() const { return metric_; }

private:
    struct HypCache {
        AtomSet lhs;         // [[lhs]] truncated to the work bound
        AtomSet rhs;         // [[rhs]] (complete when usable)
        bool rhs_beyond;     // rhs has atoms above the work bound
        bool lhs_beyond;
        // For empty-rhs hypotheses the step result is L-independent.
        mutable std::optional<AtomSet> vacuous_yield;
    };

    TheoryConfig th_;
    HypothesisSet hyps_;
    int work_bound_;
    SizeMetric metric_;
    std::vector<HypCache> cache_;
    mutable bool approximate_ = false;
    mutable std::optional<std::vector<Context>> contexts_;

    const std::vector<Context>& contexts() const;
};

/// closure(lang_bounded(e, work)) restricted to the report bound.
BoundedLanguage closed_lang_bounded(const ExprPtr& e, const HypothesisSet& h,
                                    int report_bound, int work_bound,
                                    const TheoryConfig& th,
                                    SizeMetric metric = SizeMetric::Leaves);

struct InclusionResult {
    bool holds = false;
    std::optional<Atom> counterexample;
    bool approximate = false;  // a set flag makes refutations tentative
    int report_bound = 0;
    int work_bound = 0;
};

/// Bounded check of H -> e <= f via closed languages. A counterexample is an
/// atom in closed(e) \ closed(f) at the work bound; it is a genuine
/// refutation whenever the engine ran exactly.
InclusionResult inclusion_check(const ExprPtr& e, const ExprPtr& f,
                                const HypothesisSet& h, int report_bound,
                                int work_bound, const TheoryConfig& th,
                                SizeMetric metric = SizeMetric::Leaves);

/// Spec default: report + the largest hypothesis left-hand side leaf count.
int default_work_bound(int report_bound, const HypothesisSet& h);

} // namespace kah

#endif
