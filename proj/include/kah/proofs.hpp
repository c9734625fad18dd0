#ifndef KAH_PROOFS_HPP
#define KAH_PROOFS_HPP

#include "kah/semantics.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace kah {

// ---------------------------------------------------------------------------
// Axiomatisations: Horn sentences over metavariables, plus the two fixpoint
// schemas which are instantiated per mu-expression on demand.
// ---------------------------------------------------------------------------

struct Ineq {
    ExprPtr lhs;
    ExprPtr rhs;
};

struct AxiomSentence {
    std::string name;
    std::vector<Ineq> premises;  // expressions over metas $0..$k
    Ineq conclusion;
    int metas = 0;
};

struct Axiomatisation {
    std::string name;
    Fragment fragment = Fragment::Full;
    TheoryConfig theory;
    std::vector<AxiomSentence> sentences;
    bool fixpoint_schemas = true;

    const AxiomSentence* find(const std::string& axiom_name) const;
};

/// Semilattice + per-position annihilation/distribution + both directions of
/// the theory's equations + the fixpoint unfold/induction schemas.
Axiomatisation naive_axioms(const TheoryConfig& th, Fragment f);

/// Named instances: KA, leftKA, cKA, biKA (naive plus strengthened star
/// induction sentences over the matching fragment/theory).
Axiomatisation instance_axioms(const std::string& name, const TheoryConfig& th);

// ---------------------------------------------------------------------------
// Derivations in the Horn-theory deduction system
// ---------------------------------------------------------------------------

enum class Rule { Axiom, Hyp, Refl, Trans, PlusMono, SymMono };

struct Derivation {
    Rule rule = Rule::Refl;
    Ineq concl;
    // Axiom nodes: the sentence name (or "fix-unfold"/"fix-ind"), the
    // mu-expression for schema instances, and the metavariable instantiation.
    std::string axiom;
    ExprPtr mu;
    std::vector<ExprPtr> theta;
    int hyp_index = -1;  // Hyp nodes
    int sym = -1;        // SymMono nodes
    std::vector<Derivation> kids;

    int node_count() const;
};

// Constructors compute conclusions, so building is checked twice over.
Derivation d_refl(ExprPtr e);
Derivation d_trans(Derivation a, Derivation b);
Derivation d_trans(std::vector<Derivation> chain);
Derivation d_plus_mono(Derivation a, Derivation b);
Derivation d_sym_mono(SymId s, std::vector<Derivation> kids);
Derivation d_hyp(const HypothesisSet& h, int index);
Derivation d_axiom(const Axiomatisation& q, const std::string& name,
                   std::vector<ExprPtr> theta, std::vector<Derivation> premises = {});
Derivation d_fix_unfold(const ExprPtr& mu);
Derivation d_fix_ind(const ExprPtr& mu, const ExprPtr& f, Derivation premise);

struct CheckResult {
    bool accepted = false;
    std::string reason;  // includes a node path on rejection
    bool ok() const { return accepted; }
};

/// Verifies a derivation node by node against the rules of the deduction
/// system: axiom instances carry explicit substitutions, hypotheses are used
/// verbatim, and every expression stays inside the axiomatisation's fragment.
CheckResult check_derivation(const Axiomatisation& q, const HypothesisSet& h,
                             const Derivation& d);

// ---------------------------------------------------------------------------
// Equational derivations (both inequalities) and the combinator layer
// ---------------------------------------------------------------------------

struct EqDer {
    Derivation le;  // lhs <= rhs
    Derivation ge;  // rhs <= lhs
};

EqDer eq_refl(ExprPtr e);
EqDer eq_sym(EqDer d);
EqDer eq_trans(EqDer a, EqDer b);
EqDer eq_plus_cong(EqDer a, EqDer b);
EqDer eq_sym_cong(SymId s, std::vector<EqDer> kids);

/// Proof toolbox bound to one axiomatisation (which must contain the naive
/// axioms). Every method returns checker-valid derivations.
class ProofBuilder {
public:
    explicit ProofBuilder(const Axiomatisation& q) : q_(q) {}

    const Axiomatisation& axioms() const { return q_; }
    const TheoryConfig& theory() const { return q_.theory; }

    Derivation le_zero(ExprPtr e) const;              // 0 <= e
    Derivation le_idem(ExprPtr e) const;              // e + e <= e
    Derivation le_inl(ExprPtr e, ExprPtr f) const;    // e <= e + f
    Derivation le_inr(ExprPtr e, ExprPtr f) const;    // f <= e + f
    /// part <= right-nested sum (part must be an addend, by alpha-equality).
    Derivation le_into_sum(const ExprPtr& part, const ExprPtr& sum) const;
    /// sum <= target from per-addend derivations.
    Derivation le_sum(const ExprPtr& sum, const ExprPtr& target,
                      const std::function<Derivation(const ExprPtr&)>& each) const;

    // E-equations as equational derivations, instantiated by theta.
    EqDer eq_equation(const std::string& base_name, std::vector<ExprPtr> theta) const;

    /// Canonicalises a term-shaped expression modulo the built-in equations:
    /// returns a proof e == canonical-representative. The canonical form
    /// agrees with atom embedding.
    EqDer eq_canonical(const ExprPtr& term_shaped, ExprPtr* canon_out = nullptr) const;
    /// t1 == t2 whenever both normalise to the same atom.
    EqDer eq_terms(const Term& t1, const Term& t2) const;

    /// Normalises a product spine: flatten the op, drop units, right-nest,
    /// and (for commutative ops) sort factors by a key. Factors themselves
    /// are untouched.
    EqDer eq_spine(const ExprPtr& e, SymId op, bool sorted, ExprPtr* canon_out) const;
    /// Equality of two products with the same factor multiset (same list for
    /// the non-commutative case).
    EqDer eq_prod_perm(const ExprPtr& a, const ExprPtr& b, SymId op, bool commutative) const;

    // Star toolbox (monoid-like theories; uses naive fixpoint schemas only).
    Derivation one_le_star(const ExprPtr& e, bool parallel = false) const;
    Derivation e_le_star(const ExprPtr& e, bool parallel = false) const;
    Derivation prod_star_le_star(const ExprPtr& e, bool parallel = false) const;  // e.e* <= e*
    EqDer star_unfold_eq(const ExprPtr& e, bool parallel = false) const;  // e* == 1 + e.e*
    Derivation star_mono(const ExprPtr& e, const ExprPtr& f, Derivation e_le_f,
                         bool parallel = false) const;  // e* <= f*
    Derivation star_square(const ExprPtr& e, bool parallel = false) const;  // e*.e* <= e*
    Derivation star_le(const ExprPtr& e, const ExprPtr& f, Derivation premise,
                       bool parallel = false) const;  // 1+e.f<=f given -> e* <= f

    /// Congruence of substitutions on X: from proofs theta(x) == x, build
    /// e theta == e (fixpoints handled through the induction schema).
    EqDer subst_congruence(const ExprPtr& e, const Subst& theta,
                           const std::map<VarId, EqDer>& var_eqs) const;

    /// Directed congruence: a <= b for shape-aligned expressions whose
    /// aligned leaf mismatches are resolved by `leaf`.
    Derivation cong_le(const ExprPtr& a, const ExprPtr& b,
                       const std::function<std::optional<Derivation>(
                           const ExprPtr&, const ExprPtr&)>& leaf) const;

    /// C[e] <= C[f] from a derivation of e <= f (congruence along the
    /// context's spine).
    Derivation under_context(const Context& c, Derivation d) const;

private:
    const Axiomatisation& q_;
};

/// Expression with the context's hole replaced by e (no normalisation).
ExprPtr context_apply_expr(const Context& c, const ExprPtr& e, const TheoryConfig& th);

// ---------------------------------------------------------------------------
// Provers
// ---------------------------------------------------------------------------

/// Membership: a derivation of a <= e for every atom a in [[e]] (the
/// conclusion's left side is the canonical representative of a).
Derivation prove_membership(const Atom& a, const ExprPtr& e, const ProofBuilder& pb);

/// Fixpoint-free expressions are provably equal to the sum of their atoms.
struct SumOfTerms {
    std::vector<Atom> atoms;
    ExprPtr sum;
    EqDer eq;  // e == sum
};
SumOfTerms sum_of_terms(const ExprPtr& e, const ProofBuilder& pb);

struct InclusionProof {
    bool found = false;
    Derivation derivation;
    int exhausted_bound = 0;
};

/// Proof search for e <= f under hypotheses with fixpoint-free right-hand
/// sides (e itself fixpoint-free). Saturates the provable-atom set with
/// proof provenance, truncated at `bound`.
InclusionProof prove_inclusion_fixpointfree(const ExprPtr& e, const ExprPtr& f,
                                            const HypothesisSet& h,
                                            const ProofBuilder& pb, int bound);

// ---------------------------------------------------------------------------
// The ordered-monoid counter-model 0 < 1 < a < a^2 < ... < a^* < T
// ---------------------------------------------------------------------------

struct CountermodelElement {
    enum class Kind { Zero, Pow, Star, Top } kind = Kind::Zero;
    int pow = 0;  // for Kind::Pow (1 is pow 0)

    static CountermodelElement zero() { return {}; }
    static CountermodelElement power(int i) { return {Kind::Pow, i}; }
    static CountermodelElement star() { return {Kind::Star, 0}; }
    static CountermodelElement top() { return {Kind::Top, 0}; }

    bool operator==(const CountermodelElement& o) const {
        return kind == o.kind && (kind != Kind::Pow || pow == o.pow);
    }
    bool operator<=(const CountermodelElement& o) const;
    std::string str() const;
};

/// Evaluates a monoid expression over the single variable `a` in the chain
/// model; fixpoints are iterated with omega-limit detection.
CountermodelElement countermodel_eval(const ExprPtr& e, const TheoryConfig& th);

struct CountermodelReport {
    bool axioms_hold = false;
    bool refutation_found = false;  // a*.a evaluates above a*
    int checked_instances = 0;
    std::string detail;
};
CountermodelReport countermodel_check(const TheoryConfig& th);

// ---------------------------------------------------------------------------
// Serialisation (used by the CLI prove/check-proof commands)
// ---------------------------------------------------------------------------

std::string derivation_to_json(const Derivation& d, const TheoryConfig& th);
Derivation derivation_from_json(const std::string& text, const TheoryConfig& th);

std::string ineq_to_string(const Ineq& i, const TheoryConfig& th);

} // namespace kah

#endif
