#ifndef KAH_DECISION_HPP
#define KAH_DECISION_HPP

#include "kah/semantics.hpp"

#include <optional>
#include <set>
#include <vector>

namespace kah {

// ---------------------------------------------------------------------------
// Word automata (monoid instance)
// ---------------------------------------------------------------------------

struct WordAutomaton {
    int states = 0;
    int alphabet = 0;  // theory variables
    // delta[state][letter] -> successor states
    std::vector<std::vector<std::set<int>>> delta;
    std::set<int> initial;
    std::set<int> accepting;
};

/// Partial-derivative construction over the star fragment of the monoid
/// theory; the automaton's language agrees with the bounded oracle.
WordAutomaton regex_to_nfa(const ExprPtr& e, const TheoryConfig& th);

bool word_accepts(const WordAutomaton& a, const std::vector<VarId>& word);

struct WordVerdict {
    bool holds = false;
    std::optional<std::vector<VarId>> counterexample;  // shortest witness
};

/// Exact inclusion via antichain-pruned simulation of the subset construction.
WordVerdict word_inclusion(const ExprPtr& e, const ExprPtr& f, const TheoryConfig& th);

std::string word_automaton_to_string(const WordAutomaton& a, const TheoryConfig& th);

// ---------------------------------------------------------------------------
// Tree automata (free instance)
// ---------------------------------------------------------------------------

/// Bottom-up nondeterministic tree automaton. Leaf letters are encoded after
/// the signature: code < |sig| is a symbol, otherwise variable code - |sig|.
struct TreeAutomaton {
    int states = 0;
    struct Rule {
        int code;
        std::vector<int> args;
        int dst;
    };
    std::vector<Rule> rules;
    std::set<int> accepting;
};

int tree_code_of_symbol(const TheoryConfig& th, SymId s);
int tree_code_of_var(const TheoryConfig& th, VarId v);
int tree_code_arity(const TheoryConfig& th, int code);

/// Nested fixpoints are flattened into a regular tree grammar (one
/// nonterminal per subexpression and recursion variable), then turned into a
/// bottom-up automaton.
TreeAutomaton expr_to_tree_automaton(const ExprPtr& e, const TheoryConfig& th);

bool tree_accepts(const TreeAutomaton& a, const Atom& tree, const TheoryConfig& th);

struct TreeVerdict {
    bool holds = false;
    std::optional<Atom> counterexample;  // minimal-depth witness
};

/// Determinise + complement + product emptiness; the determinisation is
/// capped by the state budget.
TreeVerdict tree_inclusion(const ExprPtr& e, const ExprPtr& f, const TheoryConfig& th,
                           int state_budget = 10000);

std::string tree_automaton_to_string(const TreeAutomaton& a, const TheoryConfig& th);

// ---------------------------------------------------------------------------
// Commutative instance: Pilling normal form and semilinear sets
// ---------------------------------------------------------------------------

using Vec = std::vector<int>;  // multiset of variables as counts

/// One summand w0 . w1* ... wn*; the factor multisets are pairwise distinct.
struct PillingSummand {
    Vec offset;
    std::vector<Vec> factors;

    bool operator==(const PillingSummand& o) const {
        return offset == o.offset && factors == o.factors;
    }
    bool operator<(const PillingSummand& o) const {
        return offset != o.offset ? offset < o.offset : factors < o.factors;
    }
};

struct PillingNF {
    std::vector<PillingSummand> summands;
    bool verified = false;  // bounded-oracle equality with the input
    int verify_bound = 0;
};

/// Rewrites a commutative star expression into a sum of summands; the result
/// is checked against the bounded oracle rather than trusted.
PillingNF pilling_normal_form(const ExprPtr& e, const TheoryConfig& th,
                              int verify_bound = 8);

ExprPtr pilling_summand_to_expr(const PillingSummand& s, const TheoryConfig& th);
ExprPtr pilling_to_expr(const PillingNF& nf, const TheoryConfig& th);

struct LinearSet {
    Vec offset;
    std::vector<Vec> periods;
};

struct SemilinearSet {
    int dim = 0;
    std::vector<LinearSet> sets;
};

SemilinearSet parikh(const ExprPtr& e, const TheoryConfig& th);
bool semilinear_member(const Vec& v, const SemilinearSet& s);

struct SemilinearVerdict {
    bool holds = false;
    std::optional<Vec> counterexample;
    int bound = 0;
};

/// Sweeps every vector with components at most the bound.
SemilinearVerdict semilinear_inclusion_bounded(const SemilinearSet& s1,
                                               const SemilinearSet& s2, int bound);

std::string semilinear_to_string(const SemilinearSet& s, const TheoryConfig& th);

Vec atom_to_vec(const Atom& a, const TheoryConfig& th);

// ---------------------------------------------------------------------------
// Cross-validation against the bounded oracle
// ---------------------------------------------------------------------------

struct CrossValidation {
    bool ok = true;
    std::optional<Atom> mismatch;
    std::string detail;
};

/// Asserts automaton / semilinear membership agrees with the bounded oracle
/// on every atom within the bound (depth bound for the free theory).
CrossValidation cross_validate(const ExprPtr& e, int bound, const TheoryConfig& th);

} // namespace kah

#endif
