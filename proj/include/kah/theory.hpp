#ifndef KAH_THEORY_HPP
#define KAH_THEORY_HPP

#include "kah/core.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace kah {

// ---------------------------------------------------------------------------
// Signatures and terms
// ---------------------------------------------------------------------------

struct Symbol {
    std::string name;
    int arity = 0;
};

struct Signature {
    std::vector<Symbol> symbols;

    SymId add(const std::string& name, int arity);
    /// Returns the symbol id, or -1 when absent.
    SymId find(const std::string& name) const;
    int arity(SymId s) const { return symbols.at(s).arity; }
    const std::string& name(SymId s) const { return symbols.at(s).name; }
    int size() const { return static_cast<int>(symbols.size()); }
};

/// First-order term: leaves are variables, inner nodes signature symbols
/// (constants are symbol nodes with no children).
struct Term {
    bool is_var = false;
    VarId var = -1;  // valid when is_var
    SymId sym = -1;  // valid otherwise
    std::vector<Term> kids;

    static Term mkvar(VarId v) {
        Term t;
        t.is_var = true;
        t.var = v;
        return t;
    }
    static Term app(SymId s, std::vector<Term> kids = {}) {
        Term t;
        t.sym = s;
        t.kids = std::move(kids);
        return t;
    }

    bool operator==(const Term& o) const;
};

// ---------------------------------------------------------------------------
// Theories
// ---------------------------------------------------------------------------

enum class TheoryKind { Free, Monoid, CommutativeMonoid, Bimonoid, Custom };

/// Which size metric bounds enumeration. Leaves counts variable/constant
/// leaves (monoid units excluded); Depth counts tree levels with leaves at
/// depth 1 and is only representative-independent over the free theory.
enum class SizeMetric { Leaves, Depth };

struct TermEquation {
    Term lhs;
    Term rhs;
};

class Atom;

struct TheoryConfig {
    TheoryKind kind = TheoryKind::Free;
    Signature sig;
    std::vector<std::string> vars;
    std::vector<TermEquation> equations;  // Custom only; built-ins implied
    /// Custom theories must register a normaliser mapping terms to
    /// canonical representative terms.
    std::function<Term(const Term&)> custom_normalizer;

    // Cached ids of the built-in symbols (-1 when absent).
    SymId dot = -1;
    SymId par = -1;
    SymId unit = -1;

    VarId var_id(const std::string& name) const;
    const std::string& var_name(VarId v) const { return vars.at(v); }
    int var_count() const { return static_cast<int>(vars.size()); }
    bool has_unit() const { return unit >= 0; }

    static TheoryConfig monoid(std::vector<std::string> vars);
    static TheoryConfig commutative_monoid(std::vector<std::string> vars);
    static TheoryConfig bimonoid(std::vector<std::string> vars);
    static TheoryConfig free(Signature sig, std::vector<std::string> vars);
    static TheoryConfig custom(Signature sig, std::vector<std::string> vars,
                               std::vector<TermEquation> eqs,
                               std::function<Term(const Term&)> normalizer);
};

// ---------------------------------------------------------------------------
// Linear-regular check
// ---------------------------------------------------------------------------

struct EquationVerdict {
    enum class Kind { Ok, NotLinear, NotRegular } kind = Kind::Ok;
    VarId offending_var = -1;
    bool ok() const { return kind == Kind::Ok; }
};

std::vector<EquationVerdict>
check_linear_regular(const std::vector<TermEquation>& eqs, const Signature& sig);

// ---------------------------------------------------------------------------
// Atoms (canonical representatives of terms modulo the theory)
// ---------------------------------------------------------------------------

enum class AtomKind {
    Unit,  // empty word / empty multiset / empty pomset
    Hole,  // context hole marker (exactly one per context)
    Leaf,  // a single variable
    Seq,   // ordered product, >= 2 children (sorted when commutative)
    Par,   // commutative parallel product, >= 2 sorted children (bimonoid)
    App,   // free-theory symbol application
};

/// Canonical form of a term modulo the theory's equations. Two atoms are
/// equal iff their representations are identical:
///   monoid           Unit / Leaf / Seq of leaves
///   comm. monoid     Unit / Leaf / Seq of sorted leaves
///   bimonoid         alternating Seq/Par layers, Par children sorted,
///                    units stripped, n-ary nodes have >= 2 children
///   free             the term itself (Leaf / App)
/// Contexts reuse the same shape with exactly one Hole leaf.
class Atom {
public:
    AtomKind kind = AtomKind::Unit;
    int head = -1;  // var id (Leaf) or symbol id (App)
    std::vector<Atom> kids;

    static Atom unit() { return Atom{}; }
    static Atom hole() {
        Atom a;
        a.kind = AtomKind::Hole;
        return a;
    }
    static Atom leaf(VarId v) {
        Atom a;
        a.kind = AtomKind::Leaf;
        a.head = v;
        return a;
    }
    static Atom node(AtomKind k, std::vector<Atom> kids, int head = -1) {
        Atom a;
        a.kind = k;
        a.head = head;
        a.kids = std::move(kids);
        return a;
    }

    bool operator==(const Atom& o) const;
    bool operator!=(const Atom& o) const { return !(*this == o); }
    bool operator<(const Atom& o) const { return cmp(*this, o) < 0; }

    static int cmp(const Atom& a, const Atom& b);

    int hole_count() const;
    bool is_context() const { return hole_count() == 1; }
};

/// Context = atom with exactly one hole.
using Context = Atom;

// ---------------------------------------------------------------------------
// Theory operations
// ---------------------------------------------------------------------------

/// Canonical form of a term. Total for built-in theories; requires a
/// registered normaliser hook for Custom.
Atom normalize(const Term& t, const TheoryConfig& th);

/// A representative term of the atom's equivalence class (products are
/// right-nested).
Term embed(const Atom& a, const TheoryConfig& th);

/// Leaf count (holes and monoid units excluded; free constants count).
int atom_size(const Atom& a);
/// Tree depth with leaves at depth 1 (free theory only).
int atom_depth(const Atom& a);
int atom_size(const Atom& a, SizeMetric m);

/// Apply a symbol to canonical atoms, renormalising.
Atom apply_symbol(SymId s, const std::vector<Atom>& args, const TheoryConfig& th);

/// Plug an atom into the context's hole and renormalise.
Atom apply_context(const Context& c, const Atom& a, const TheoryConfig& th);

/// All atoms of size <= bound, in deterministic (structural) order.
std::vector<Atom> enumerate_atoms(const TheoryConfig& th, int bound,
                                  SizeMetric metric = SizeMetric::Leaves);

/// All contexts whose non-hole size is <= bound.
std::vector<Context> enumerate_contexts(const TheoryConfig& th, int bound,
                                        SizeMetric metric = SizeMetric::Leaves);

/// Every context C with C[b] = u. Complete for built-in theories.
std::vector<Context> occurrences(const Atom& u, const Atom& b, const TheoryConfig& th);

std::string atom_to_string(const Atom& a, const TheoryConfig& th);
std::string term_to_string(const Term& t, const TheoryConfig& th);

} // namespace kah

#endif
