#ifndef KAH_EXPR_HPP
#define KAH_EXPR_HPP

#include "kah/theory.hpp"

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace kah {

// ---------------------------------------------------------------------------
// Expressions: 0, +, signature symbols, and mu-binders over recursion
// variables. Recursion variables live in a namespace disjoint from the
// theory's variables. Meta leaves appear only inside axiom sentences and are
// instantiated away before anything else sees them.
// ---------------------------------------------------------------------------

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class ExprKind { Var, RecVar, Zero, Plus, Sym, Mu, Meta };

struct Expr {
    ExprKind kind;
    VarId var = -1;        // Var
    std::string rec;       // RecVar name / Mu binder
    SymId sym = -1;        // Sym
    int meta = -1;         // Meta index
    std::vector<ExprPtr> kids;
};

ExprPtr mk_var(VarId v);
ExprPtr mk_rec(const std::string& name);
ExprPtr mk_zero();
ExprPtr mk_plus(ExprPtr a, ExprPtr b);
ExprPtr mk_sum(const std::vector<ExprPtr>& parts);  // empty -> 0, right-nested
ExprPtr mk_sym(SymId s, std::vector<ExprPtr> kids);
ExprPtr mk_mu(const std::string& x, ExprPtr body);
ExprPtr mk_meta(int i);

ExprPtr mk_one(const TheoryConfig& th);
ExprPtr mk_dot(const TheoryConfig& th, ExprPtr a, ExprPtr b);
ExprPtr mk_par(const TheoryConfig& th, ExprPtr a, ExprPtr b);
/// Right-nested product of parts; empty product is 1.
ExprPtr mk_prod(const TheoryConfig& th, const std::vector<ExprPtr>& parts);

/// star(e) = mu x. 1 + e.x with a fresh recursion variable.
ExprPtr star(ExprPtr e, const TheoryConfig& th);
/// parstar(e) = mu x. 1 + e||x; requires the parallel symbol.
ExprPtr parstar(ExprPtr e, const TheoryConfig& th);

/// Structure of a star-shaped fixpoint (mu x. 1 + e op x, x not free in e).
struct StarShape {
    bool matches = false;
    bool parallel = false;
    ExprPtr body;  // the iterated expression e
};
StarShape match_star(const ExprPtr& e, const TheoryConfig& th);

ExprPtr term_to_expr(const Term& t);
/// Canonical representative of an atom as an expression.
ExprPtr atom_to_expr(const Atom& a, const TheoryConfig& th);

// ---------------------------------------------------------------------------
// Substitution (closed substitutions only, per the binder-shadowing rules)
// ---------------------------------------------------------------------------

struct Subst {
    std::map<VarId, ExprPtr> xmap;
    std::map<std::string, ExprPtr> rmap;

    bool empty() const { return xmap.empty() && rmap.empty(); }
    static Subst of_var(VarId v, ExprPtr e);
    static Subst of_rec(const std::string& x, ExprPtr e);
};

ExprPtr substitute(const ExprPtr& e, const Subst& rho);
/// e[x := f] for a recursion variable x.
ExprPtr subst_rec(const ExprPtr& e, const std::string& x, const ExprPtr& f);
/// Replace meta leaves by theta[i]; out-of-range metas are an error.
ExprPtr instantiate(const ExprPtr& e, const std::vector<ExprPtr>& theta);

std::set<std::string> free_recvars(const ExprPtr& e);
bool is_closed(const ExprPtr& e);
bool has_meta(const ExprPtr& e);
int max_meta(const ExprPtr& e);  // -1 when none
int expr_nodes(const ExprPtr& e);
std::set<VarId> expr_vars(const ExprPtr& e);
void collect_mu(const ExprPtr& e, std::vector<ExprPtr>& out);

/// Unfolds a fixpoint: body[x := mu x. body]. Non-mu input is a usage error.
ExprPtr unfold(const ExprPtr& mu);

/// Alpha-equivalence (recursion binders compared positionally).
bool alpha_eq(const ExprPtr& a, const ExprPtr& b);
/// Total order compatible with alpha-equivalence; usable for map keys.
int alpha_cmp(const ExprPtr& a, const ExprPtr& b);

struct ExprLess {
    bool operator()(const ExprPtr& a, const ExprPtr& b) const {
        return alpha_cmp(a, b) < 0;
    }
};

// ---------------------------------------------------------------------------
// Fragments
// ---------------------------------------------------------------------------

enum class Fragment { Full, FixpointFree, KleeneStar, BiKleene };

bool fragment_member(const ExprPtr& e, Fragment f, const TheoryConfig& th);
std::string fragment_name(Fragment f);

// ---------------------------------------------------------------------------
// Concrete syntax
// ---------------------------------------------------------------------------

std::string expr_to_string(const ExprPtr& e, const TheoryConfig& th);

/// Parses the expression syntax: 0, 1, +, '.', '||', f(e,...), mu x. e,
/// postfix * and ^||. Reports positions on failure.
ExprPtr parse_expr(const std::string& text, const TheoryConfig& th);

} // namespace kah

#endif
