#include "kah/theory.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace kah {

// ---------------------------------------------------------------------------
// Signature / Term
// ---------------------------------------------------------------------------

SymId Signature::add(const std::string& name, int arity) {
    if (find(name) >= 0)
        throw UsageError("duplicate symbol '" + name + "'");
    if (arity < 0)
        throw UsageError("negative arity for symbol '" + name + "'");
    symbols.push_back({name, arity});
    return static_cast<SymId>(symbols.size()) - 1;
}

SymId Signature::find(const std::string& name) const {
    for (size_t i = 0; i < symbols.size(); ++i)
        if (symbols[i].name == name)
            return static_cast<SymId>(i);
    return -1;
}

bool Term::operator==(const Term& o) const {
    if (is_var != o.is_var)
        return false;
    if (is_var)
        return var == o.var;
    if (sym != o.sym || kids.size() != o.kids.size())
        return false;
    for (size_t i = 0; i < kids.size(); ++i)
        if (!(kids[i] == o.kids[i]))
            return false;
    return true;
}

static void check_term(const Term& t, const TheoryConfig& th) {
    if (t.is_var) {
        if (t.var < 0 || t.var >= th.var_count())
            throw StructureError("variable id out of range");
        return;
    }
    if (t.sym < 0 || t.sym >= th.sig.size())
        throw StructureError("symbol id out of range");
    if (static_cast<int>(t.kids.size()) != th.sig.arity(t.sym))
        throw StructureError("arity mismatch at symbol '" + th.sig.name(t.sym) + "'");
    for (const Term& k : t.kids)
        check_term(k, th);
}

// ---------------------------------------------------------------------------
// TheoryConfig builders
// ---------------------------------------------------------------------------

static void check_var_names(const std::vector<std::string>& vars) {
    std::set<std::string> seen;
    for (const auto& v : vars) {
        if (v == "_")
            throw UsageError("'_' is reserved for the context hole");
        if (!seen.insert(v).second)
            throw UsageError("duplicate variable '" + v + "'");
    }
}

TheoryConfig TheoryConfig::monoid(std::vector<std::string> vars) {
    check_var_names(vars);
    TheoryConfig th;
    th.kind = TheoryKind::Monoid;
    th.dot = th.sig.add(".", 2);
    th.unit = th.sig.add("1", 0);
    th.vars = std::move(vars);
    return th;
}

TheoryConfig TheoryConfig::commutative_monoid(std::vector<std::string> vars) {
    TheoryConfig th = monoid(std::move(vars));
    th.kind = TheoryKind::CommutativeMonoid;
    return th;
}

TheoryConfig TheoryConfig::bimonoid(std::vector<std::string> vars) {
    check_var_names(vars);
    TheoryConfig th;
    th.kind = TheoryKind::Bimonoid;
    th.dot = th.sig.add(".", 2);
    th.par = th.sig.add("||", 2);
    th.unit = th.sig.add("1", 0);
    th.vars = std::move(vars);
    return th;
}

TheoryConfig TheoryConfig::free(Signature sig, std::vector<std::string> vars) {
    check_var_names(vars);
    TheoryConfig th;
    th.kind = TheoryKind::Free;
    th.sig = std::move(sig);
    th.vars = std::move(vars);
    return th;
}

TheoryConfig TheoryConfig::custom(Signature sig, std::vector<std::string> vars,
                                  std::vector<TermEquation> eqs,
                                  std::function<Term(const Term&)> normalizer) {
    check_var_names(vars);
    TheoryConfig th;
    th.kind = TheoryKind::Custom;
    th.sig = std::move(sig);
    th.vars = std::move(vars);
    auto verdicts = check_linear_regular(eqs, th.sig);
    for (const auto& v : verdicts)
        if (!v.ok())
            throw TheoryError("custom equations must be linear and regular");
    th.equations = std::move(eqs);
    th.custom_normalizer = std::move(normalizer);
    return th;
}

VarId TheoryConfig::var_id(const std::string& name) const {
    for (size_t i = 0; i < vars.size(); ++i)
        if (vars[i] == name)
            return static_cast<VarId>(i);
    return -1;
}

// ---------------------------------------------------------------------------
// Linear-regular check
// ---------------------------------------------------------------------------

static void count_vars(const Term& t, std::map<VarId, int>& counts) {
    if (t.is_var) {
        ++counts[t.var];
        return;
    }
    for (const Term& k : t.kids)
        count_vars(k, counts);
}

std::vector<EquationVerdict>
check_linear_regular(const std::vector<TermEquation>& eqs, const Signature& sig) {
    (void)sig;
    std::vector<EquationVerdict> out;
    for (const auto& eq : eqs) {
        std::map<VarId, int> l, r;
        count_vars(eq.lhs, l);
        count_vars(eq.rhs, r);
        EquationVerdict v;
        for (const auto& [var, n] : l)
            if (n > 1) {
                v = {EquationVerdict::Kind::NotLinear, var};
                break;
            }
        if (v.ok())
            for (const auto& [var, n] : r)
                if (n > 1) {
                    v = {EquationVerdict::Kind::NotLinear, var};
                    break;
                }
        if (v.ok())
            for (const auto& [var, n] : l)
                if (n > 0 && r.count(var) == 0) {
                    v = {EquationVerdict::Kind::NotRegular, var};
                    break;
                }
        if (v.ok())
            for (const auto& [var, n] : r)
                if (n > 0 && l.count(var) == 0) {
                    v = {EquationVerdict::Kind::NotRegular, var};
                    break;
                }
        out.push_back(v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Atom comparison
// ---------------------------------------------------------------------------

static int kind_rank(AtomKind k) {
    switch (k) {
    case AtomKind::Unit: return 0;
    case AtomKind::Hole: return 1;
    case AtomKind::Leaf: return 2;
    case AtomKind::Seq: return 3;
    case AtomKind::Par: return 4;
    case AtomKind::App: return 5;
    }
    return 6;
}

int Atom::cmp(const Atom& a, const Atom& b) {
    if (kind_rank(a.kind) != kind_rank(b.kind))
        return kind_rank(a.kind) < kind_rank(b.kind) ? -1 : 1;
    if (a.head != b.head)
        return a.head < b.head ? -1 : 1;
    size_t n = std::min(a.kids.size(), b.kids.size());
    for (size_t i = 0; i < n; ++i)
        if (int c = cmp(a.kids[i], b.kids[i]); c != 0)
            return c;
    if (a.kids.size() != b.kids.size())
        return a.kids.size() < b.kids.size() ? -1 : 1;
    return 0;
}

bool Atom::operator==(const Atom& o) const { return cmp(*this, o) == 0; }

int Atom::hole_count() const {
    if (kind == AtomKind::Hole)
        return 1;
    int n = 0;
    for (const Atom& k : kids)
        n += k.hole_count();
    return n;
}

// ---------------------------------------------------------------------------
// Canonicalisation
// ---------------------------------------------------------------------------

namespace {

// Flattens one level of nested products/units; kids must already be canonical.
Atom make_seq(std::vector<Atom> parts, bool commutative) {
    std::vector<Atom> flat;
    for (Atom& p : parts) {
        if (p.kind == AtomKind::Unit)
            continue;
        if (p.kind == AtomKind::Seq)
            for (Atom& k : p.kids)
                flat.push_back(std::move(k));
        else
            flat.push_back(std::move(p));
    }
    if (flat.empty())
        return Atom::unit();
    if (flat.size() == 1)
        return flat[0];
    if (commutative)
        std::sort(flat.begin(), flat.end());
    return Atom::node(AtomKind::Seq, std::move(flat));
}

Atom make_par(std::vector<Atom> parts) {
    std::vector<Atom> flat;
    for (Atom& p : parts) {
        if (p.kind == AtomKind::Unit)
            continue;
        if (p.kind == AtomKind::Par)
            for (Atom& k : p.kids)
                flat.push_back(std::move(k));
        else
            flat.push_back(std::move(p));
    }
    if (flat.empty())
        return Atom::unit();
    if (flat.size() == 1)
        return flat[0];
    std::sort(flat.begin(), flat.end());
    return Atom::node(AtomKind::Par, std::move(flat));
}

// Re-establishes the canonical invariants on an arbitrary atom-shaped tree.
Atom canon(const Atom& a, const TheoryConfig& th) {
    switch (a.kind) {
    case AtomKind::Unit:
    case AtomKind::Hole:
    case AtomKind::Leaf:
        return a;
    case AtomKind::Seq: {
        std::vector<Atom> kids;
        kids.reserve(a.kids.size());
        for (const Atom& k : a.kids)
            kids.push_back(canon(k, th));
        return make_seq(std::move(kids), th.kind == TheoryKind::CommutativeMonoid);
    }
    case AtomKind::Par: {
        std::vector<Atom> kids;
        kids.reserve(a.kids.size());
        for (const Atom& k : a.kids)
            kids.push_back(canon(k, th));
        return make_par(std::move(kids));
    }
    case AtomKind::App: {
        std::vector<Atom> kids;
        kids.reserve(a.kids.size());
        for (const Atom& k : a.kids)
            kids.push_back(canon(k, th));
        return Atom::node(AtomKind::App, std::move(kids), a.head);
    }
    }
    throw StructureError("bad atom kind");
}

Atom raw_of_term(const Term& t, const TheoryConfig& th) {
    if (t.is_var)
        return Atom::leaf(t.var);
    if (th.kind == TheoryKind::Free || th.kind == TheoryKind::Custom) {
        std::vector<Atom> kids;
        for (const Term& k : t.kids)
            kids.push_back(raw_of_term(k, th));
        return Atom::node(AtomKind::App, std::move(kids), t.sym);
    }
    if (t.sym == th.unit)
        return Atom::unit();
    std::vector<Atom> kids;
    for (const Term& k : t.kids)
        kids.push_back(raw_of_term(k, th));
    if (t.sym == th.dot)
        return Atom::node(AtomKind::Seq, std::move(kids));
    if (t.sym == th.par)
        return Atom::node(AtomKind::Par, std::move(kids));
    throw StructureError("unknown symbol in built-in theory");
}

} // namespace

Atom normalize(const Term& t, const TheoryConfig& th) {
    check_term(t, th);
    if (th.kind == TheoryKind::Custom) {
        if (!th.custom_normalizer)
            throw TheoryError("custom theory has no registered normaliser");
        return raw_of_term(th.custom_normalizer(t), th);
    }
    return canon(raw_of_term(t, th), th);
}

Term embed(const Atom& a, const TheoryConfig& th) {
    switch (a.kind) {
    case AtomKind::Unit:
        if (!th.has_unit())
            throw TheoryError("theory has no unit");
        return Term::app(th.unit);
    case AtomKind::Hole:
        throw UsageError("cannot embed a context hole as a term");
    case AtomKind::Leaf:
        return Term::mkvar(a.head);
    case AtomKind::Seq:
    case AtomKind::Par: {
        SymId op = a.kind == AtomKind::Seq ? th.dot : th.par;
        Term t = embed(a.kids.back(), th);
        for (size_t i = a.kids.size() - 1; i-- > 0;)
            t = Term::app(op, {embed(a.kids[i], th), std::move(t)});
        return t;
    }
    case AtomKind::App: {
        std::vector<Term> kids;
        for (const Atom& k : a.kids)
            kids.push_back(embed(k, th));
        return Term::app(a.head, std::move(kids));
    }
    }
    throw StructureError("bad atom kind");
}

int atom_size(const Atom& a) {
    switch (a.kind) {
    case AtomKind::Unit:
    case AtomKind::Hole:
        return 0;
    case AtomKind::Leaf:
        return 1;
    case AtomKind::App: {
        if (a.kids.empty())
            return 1;  // free constants count as leaves
        int n = 0;
        for (const Atom& k : a.kids)
            n += atom_size(k);
        return n;
    }
    default: {
        int n = 0;
        for (const Atom& k : a.kids)
            n += atom_size(k);
        return n;
    }
    }
}

int atom_depth(const Atom& a) {
    if (a.kind == AtomKind::Unit)
        return 0;
    if (a.kids.empty())
        return 1;  // leaves (and the hole) sit at depth 1
    int d = 0;
    for (const Atom& k : a.kids)
        d = std::max(d, atom_depth(k));
    return d + 1;
}

int atom_size(const Atom& a, SizeMetric m) {
    return m == SizeMetric::Leaves ? atom_size(a) : atom_depth(a);
}

Atom apply_symbol(SymId s, const std::vector<Atom>& args, const TheoryConfig& th) {
    if (th.sig.arity(s) != static_cast<int>(args.size()))
        throw StructureError("arity mismatch at symbol '" + th.sig.name(s) + "'");
    switch (th.kind) {
    case TheoryKind::Monoid:
    case TheoryKind::CommutativeMonoid:
    case TheoryKind::Bimonoid:
        if (s == th.unit)
            return Atom::unit();
        if (s == th.dot)
            return make_seq({args[0], args[1]},
                            th.kind == TheoryKind::CommutativeMonoid);
        if (s == th.par)
            return make_par({args[0], args[1]});
        throw StructureError("unknown symbol in built-in theory");
    case TheoryKind::Free:
        return Atom::node(AtomKind::App, args, s);
    case TheoryKind::Custom: {
        std::vector<Term> kids;
        for (const Atom& a : args)
            kids.push_back(embed(a, th));
        return normalize(Term::app(s, std::move(kids)), th);
    }
    }
    throw StructureError("bad theory kind");
}

namespace {

Atom replace_hole(const Atom& c, const Atom& a) {
    if (c.kind == AtomKind::Hole)
        return a;
    Atom out = c;
    for (Atom& k : out.kids)
        k = replace_hole(k, a);
    return out;
}

} // namespace

Atom apply_context(const Context& c, const Atom& a, const TheoryConfig& th) {
    if (c.hole_count() != 1)
        throw UsageError("context must contain exactly one hole");
    Atom plugged = replace_hole(c, a);
    if (th.kind == TheoryKind::Custom)
        return normalize(embed(plugged, th), th);
    return canon(plugged, th);
}

// ---------------------------------------------------------------------------
// Enumeration
// ---------------------------------------------------------------------------

namespace {

void enumerate_words(const TheoryConfig& th, int bound, bool commutative,
                     std::vector<Atom>& out) {
    int v = th.var_count();
    std::vector<VarId> word;
    // Generates words of each length; commutative keeps them nondecreasing.
    std::function<void(int, VarId)> rec = [&](int len, VarId minv) {
        if (static_cast<int>(word.size()) == len) {
            if (word.empty())
                out.push_back(Atom::unit());
            else if (word.size() == 1)
                out.push_back(Atom::leaf(word[0]));
            else {
                std::vector<Atom> kids;
                for (VarId x : word)
                    kids.push_back(Atom::leaf(x));
                out.push_back(Atom::node(AtomKind::Seq, std::move(kids)));
            }
            return;
        }
        for (VarId x = commutative ? minv : 0; x < v; ++x) {
            word.push_back(x);
            rec(len, x);
            word.pop_back();
        }
    };
    for (int len = 0; len <= bound; ++len)
        rec(len, 0);
}

// Free-theory atoms grouped by exact leaf count.
std::vector<std::vector<Atom>> free_atoms_by_leaves(const TheoryConfig& th, int bound) {
    for (const Symbol& s : th.sig.symbols)
        if (s.arity == 1)
            throw ResourceError(
                "leaf-count enumeration diverges with unary symbols; use the depth metric");
    std::vector<std::vector<Atom>> by(bound + 1);
    if (bound >= 1) {
        for (VarId x = 0; x < th.var_count(); ++x)
            by[1].push_back(Atom::leaf(x));
        for (SymId s = 0; s < th.sig.size(); ++s)
            if (th.sig.arity(s) == 0)
                by[1].push_back(Atom::node(AtomKind::App, {}, s));
    }
    for (int n = 2; n <= bound; ++n) {
        for (SymId s = 0; s < th.sig.size(); ++s) {
            int k = th.sig.arity(s);
            if (k < 2)
                continue;
            // All ways to split n leaves over k children, each >= 1.
            std::vector<Atom> tuple(k);
            std::function<void(int, int)> pick = [&](int i, int left) {
                if (i == k - 1) {
                    for (const Atom& child : by[left]) {
                        tuple[i] = child;
                        by[n].push_back(Atom::node(AtomKind::App, tuple, s));
                    }
                    return;
                }
                for (int take = 1; take <= left - (k - 1 - i); ++take)
                    for (const Atom& child : by[take]) {
                        tuple[i] = child;
                        pick(i + 1, left - take);
                    }
            };
            if (n >= k)
                pick(0, n);
        }
    }
    return by;
}

// Free-theory atoms grouped by exact depth (leaves at depth 1).
std::vector<std::vector<Atom>> free_atoms_by_depth(const TheoryConfig& th, int bound) {
    std::vector<std::vector<Atom>> by(bound + 1);
    std::vector<Atom> upto;  // all atoms of depth < current level
    if (bound >= 1) {
        for (VarId x = 0; x < th.var_count(); ++x)
            by[1].push_back(Atom::leaf(x));
        for (SymId s = 0; s < th.sig.size(); ++s)
            if (th.sig.arity(s) == 0)
                by[1].push_back(Atom::node(AtomKind::App, {}, s));
    }
    for (int d = 2; d <= bound; ++d) {
        upto.insert(upto.end(), by[d - 1].begin(), by[d - 1].end());
        for (SymId s = 0; s < th.sig.size(); ++s) {
            int k = th.sig.arity(s);
            if (k < 1)
                continue;
            // At least one child of depth d-1, the rest of depth < d.
            std::vector<Atom> tuple(k);
            std::function<void(int, bool)> pick = [&](int i, bool hit) {
                if (i == k) {
                    if (hit)
                        by[d].push_back(Atom::node(AtomKind::App, tuple, s));
                    return;
                }
                for (const Atom& c : upto) {
                    bool deep = atom_depth(c) == d - 1;
                    tuple[i] = c;
                    pick(i + 1, hit || deep);
                }
            };
            pick(0, false);
        }
    }
    return by;
}

// Series-parallel atoms with h holes (h in {0,1}) grouped by non-hole leaf
// count. Index: [holes][size] -> atoms whose top node is not a Seq (seq_ok
// selects the dual family).
struct SpTables {
    // [holes][n]: canonical atoms, partitioned by top-node kind constraints.
    std::vector<std::vector<std::vector<Atom>>> not_seq;  // usable as Seq child
    std::vector<std::vector<std::vector<Atom>>> not_par;  // usable as Par child
    std::vector<std::vector<std::vector<Atom>>> all;
};

SpTables sp_tables(const TheoryConfig& th, int bound, bool with_hole) {
    SpTables t;
    int hmax = with_hole ? 1 : 0;
    t.not_seq.assign(hmax + 1, std::vector<std::vector<Atom>>(bound + 1));
    t.not_par.assign(hmax + 1, std::vector<std::vector<Atom>>(bound + 1));
    t.all.assign(hmax + 1, std::vector<std::vector<Atom>>(bound + 1));

    auto push = [&](int h, int n, const Atom& a) {
        t.all[h][n].push_back(a);
        if (a.kind != AtomKind::Seq)
            t.not_seq[h][n].push_back(a);
        if (a.kind != AtomKind::Par)
            t.not_par[h][n].push_back(a);
    };

    if (bound >= 1)
        for (VarId x = 0; x < th.var_count(); ++x)
            push(0, 1, Atom::leaf(x));
    if (with_hole)
        push(1, 0, Atom::hole());

    auto grow_seq = [&](int n, int h) {
        std::vector<Atom> parts;
        std::function<void(int, int, int)> grow = [&](int left, int holes_left,
                                                      int count) {
            if (left == 0 && holes_left == 0 && count >= 2)
                push(h, n, Atom::node(AtomKind::Seq, parts));
            for (int take = 0; take <= left; ++take)
                for (int hh = 0; hh <= holes_left; ++hh) {
                    if (take == 0 && hh == 0)
                        continue;  // empty part impossible (units stripped)
                    for (const Atom& p : t.not_seq[hh][take]) {
                        parts.push_back(p);
                        grow(left - take, holes_left - hh, count + 1);
                        parts.pop_back();
                    }
                }
        };
        if (n + h >= 2)
            grow(n, h, 0);
    };
    auto grow_par = [&](int n, int h) {
        std::vector<Atom> parts;
        std::function<void(int, int, int)> grow = [&](int left, int holes_left,
                                                      int count) {
            if (left == 0 && holes_left == 0 && count >= 2)
                push(h, n, Atom::node(AtomKind::Par, parts));
            for (int take = 0; take <= left; ++take)
                for (int hh = 0; hh <= holes_left; ++hh) {
                    if (take == 0 && hh == 0)
                        continue;
                    for (const Atom& p : t.not_par[hh][take]) {
                        if (!parts.empty() && Atom::cmp(parts.back(), p) > 0)
                            continue;  // parallel children kept sorted
                        parts.push_back(p);
                        grow(left - take, holes_left - hh, count + 1);
                        parts.pop_back();
                    }
                }
        };
        if (n + h >= 2)
            grow(n, h, 0);
    };

    // Hole-free nodes of size n only need parts of size < n; hole-carrying
    // nodes may wrap a hole-free part of size n, so they come second.
    for (int n = (with_hole ? 0 : 2); n <= bound; ++n) {
        grow_seq(n, 0);
        grow_par(n, 0);
        if (with_hole) {
            grow_seq(n, 1);
            grow_par(n, 1);
        }
    }
    return t;
}

} // namespace

std::vector<Atom> enumerate_atoms(const TheoryConfig& th, int bound, SizeMetric metric) {
    if (bound < 0)
        throw UsageError("size bound must be nonnegative");
    if (metric == SizeMetric::Depth && th.kind != TheoryKind::Free)
        throw UsageError("depth metric is only representative-independent for the free theory");
    std::vector<Atom> out;
    switch (th.kind) {
    case TheoryKind::Monoid:
        enumerate_words(th, bound, false, out);
        break;
    case TheoryKind::CommutativeMonoid:
        enumerate_words(th, bound, true, out);
        break;
    case TheoryKind::Free: {
        auto by = metric == SizeMetric::Leaves ? free_atoms_by_leaves(th, bound)
                                               : free_atoms_by_depth(th, bound);
        for (auto& bucket : by)
            for (Atom& a : bucket)
                out.push_back(std::move(a));
        break;
    }
    case TheoryKind::Bimonoid: {
        auto t = sp_tables(th, bound, false);
        out.push_back(Atom::unit());
        for (int n = 1; n <= bound; ++n)
            for (const Atom& a : t.all[0][n])
                out.push_back(a);
        break;
    }
    case TheoryKind::Custom: {
        // Enumerate raw terms with <= bound leaves, normalize, dedupe.
        TheoryConfig freelike = th;
        freelike.kind = TheoryKind::Free;
        std::set<Atom> seen;
        auto by = free_atoms_by_leaves(freelike, bound);
        for (auto& bucket : by)
            for (Atom& raw : bucket)
                seen.insert(normalize(embed(raw, freelike), th));
        // constants of arity 0 handled above; also the bare constants' normal
        // forms may collapse (e.g. a unit); keep whatever the hook returns.
        out.assign(seen.begin(), seen.end());
        return out;
    }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Context> enumerate_contexts(const TheoryConfig& th, int bound,
                                        SizeMetric metric) {
    if (bound < 0)
        throw UsageError("size bound must be nonnegative");
    std::vector<Context> out;
    switch (th.kind) {
    case TheoryKind::Monoid: {
        std::vector<Atom> words = enumerate_atoms(th, bound);
        for (const Atom& w : words) {
            std::vector<Atom> leaves;
            if (w.kind == AtomKind::Leaf)
                leaves = {w};
            else if (w.kind == AtomKind::Seq)
                leaves = w.kids;
            for (size_t pos = 0; pos <= leaves.size(); ++pos) {
                std::vector<Atom> kids(leaves.begin(), leaves.begin() + pos);
                kids.push_back(Atom::hole());
                kids.insert(kids.end(), leaves.begin() + pos, leaves.end());
                if (kids.size() == 1)
                    out.push_back(Atom::hole());
                else
                    out.push_back(Atom::node(AtomKind::Seq, std::move(kids)));
            }
        }
        break;
    }
    case TheoryKind::CommutativeMonoid: {
        for (const Atom& w : enumerate_atoms(th, bound)) {
            std::vector<Atom> kids;
            if (w.kind == AtomKind::Leaf)
                kids = {w};
            else if (w.kind == AtomKind::Seq)
                kids = w.kids;
            kids.push_back(Atom::hole());
            if (kids.size() == 1)
                out.push_back(Atom::hole());
            else {
                std::sort(kids.begin(), kids.end());
                out.push_back(Atom::node(AtomKind::Seq, std::move(kids)));
            }
        }
        break;
    }
    case TheoryKind::Free: {
        if (metric == SizeMetric::Leaves) {
            auto atoms = free_atoms_by_leaves(th, bound);
            // ctx[n]: contexts with exactly n non-hole leaves.
            std::vector<std::vector<Atom>> ctx(bound + 1);
            ctx[0].push_back(Atom::hole());
            for (int n = 0; n <= bound; ++n) {
                for (SymId s = 0; s < th.sig.size(); ++s) {
                    int k = th.sig.arity(s);
                    if (k < 1)
                        continue;
                    for (int hole_child = 0; hole_child < k; ++hole_child) {
                        std::vector<Atom> tuple(k);
                        std::function<void(int, int)> pick = [&](int i, int left) {
                            if (i == k) {
                                if (left == 0)
                                    ctx[n].push_back(
                                        Atom::node(AtomKind::App, tuple, s));
                                return;
                            }
                            if (i == hole_child) {
                                for (int take = 0; take <= left; ++take)
                                    for (const Atom& c : ctx[take]) {
                                        // avoid duplicates: only extend pure-hole
                                        // or smaller contexts built earlier rounds
                                        tuple[i] = c;
                                        pick(i + 1, left - take);
                                    }
                                return;
                            }
                            for (int take = 1; take <= left; ++take)
                                for (const Atom& a : atoms[take]) {
                                    tuple[i] = a;
                                    pick(i + 1, left - take);
                                }
                        };
                        pick(0, n);
                    }
                }
            }
            std::set<Atom> dedup;
            for (auto& bucket : ctx)
                for (Atom& c : bucket)
                    dedup.insert(std::move(c));
            out.assign(dedup.begin(), dedup.end());
            return out;
        }
        // Depth metric: all contexts of depth <= bound (the hole counts as a
        // depth-1 leaf, so every context obtained by carving a subtree out of
        // a depth-bounded tree is covered).
        std::vector<Atom> atoms =
            enumerate_atoms(th, std::max(bound - 1, 0), SizeMetric::Depth);
        std::set<Atom> dedup = {Atom::hole()};
        bool grew = true;
        while (grew) {
            grew = false;
            std::vector<Atom> snapshot(dedup.begin(), dedup.end());
            for (SymId s = 0; s < th.sig.size(); ++s) {
                int k = th.sig.arity(s);
                if (k < 1)
                    continue;
                for (int hole_child = 0; hole_child < k; ++hole_child) {
                    std::vector<Atom> tuple(k);
                    std::function<void(int)> pick = [&](int i) {
                        if (i == k) {
                            Atom c = Atom::node(AtomKind::App, tuple, s);
                            if (atom_depth(c) <= bound && dedup.insert(c).second)
                                grew = true;
                            return;
                        }
                        const std::vector<Atom>& pool =
                            i == hole_child ? snapshot : atoms;
                        for (const Atom& a : pool) {
                            tuple[i] = a;
                            pick(i + 1);
                        }
                    };
                    pick(0);
                }
            }
        }
        out.assign(dedup.begin(), dedup.end());
        return out;
    }
    case TheoryKind::Bimonoid: {
        auto t = sp_tables(th, bound, true);
        std::set<Atom> dedup;
        for (int n = 0; n <= bound; ++n)
            for (const Atom& c : t.all[1][n])
                dedup.insert(c);
        out.assign(dedup.begin(), dedup.end());
        return out;
    }
    case TheoryKind::Custom:
        throw TheoryError("context enumeration is not available for custom theories");
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Occurrences: all contexts C with C[b] = u
// ---------------------------------------------------------------------------

namespace {

std::vector<Atom> atom_parts(const Atom& a) {
    if (a.kind == AtomKind::Unit)
        return {};
    if (a.kind == AtomKind::Seq || a.kind == AtomKind::Par)
        return a.kids;
    return {a};
}

void word_occurrences(const Atom& u, const Atom& b, std::vector<Context>& out) {
    std::vector<Atom> uu = atom_parts(u), bb = atom_parts(b);
    size_t n = uu.size(), m = bb.size();
    for (size_t i = 0; i + m <= n; ++i) {
        bool match = true;
        for (size_t j = 0; j < m; ++j)
            if (!(uu[i + j] == bb[j])) {
                match = false;
                break;
            }
        if (!match)
            continue;
        std::vector<Atom> kids(uu.begin(), uu.begin() + i);
        kids.push_back(Atom::hole());
        kids.insert(kids.end(), uu.begin() + i + m, uu.end());
        out.push_back(kids.size() == 1 ? Atom::hole()
                                       : Atom::node(AtomKind::Seq, std::move(kids)));
    }
}

bool multiset_subtract(std::vector<Atom> hay, const std::vector<Atom>& needle,
                       std::vector<Atom>& rest) {
    for (const Atom& x : needle) {
        auto it = std::find(hay.begin(), hay.end(), x);
        if (it == hay.end())
            return false;
        hay.erase(it);
    }
    rest = std::move(hay);
    return true;
}

void bag_occurrences(const Atom& u, const Atom& b, std::vector<Context>& out) {
    std::vector<Atom> rest;
    if (!multiset_subtract(atom_parts(u), atom_parts(b), rest))
        return;
    rest.push_back(Atom::hole());
    if (rest.size() == 1)
        out.push_back(Atom::hole());
    else {
        std::sort(rest.begin(), rest.end());
        out.push_back(Atom::node(AtomKind::Seq, std::move(rest)));
    }
}

void tree_occurrences(const Atom& u, const Atom& b, std::vector<Context>& out) {
    if (u == b)
        out.push_back(Atom::hole());
    for (size_t i = 0; i < u.kids.size(); ++i) {
        std::vector<Context> sub;
        tree_occurrences(u.kids[i], b, sub);
        for (Context& c : sub) {
            Atom wrapped = u;
            wrapped.kids[i] = std::move(c);
            out.push_back(std::move(wrapped));
        }
    }
}

// Enumerates candidate sp contexts by structural surgery on u; every
// candidate is verified by the caller, so this only needs to be complete.
void sp_candidates(const Atom& u, const Atom& b, const TheoryConfig& th,
                   std::set<Atom>& out) {
    if (u == b)
        out.insert(Atom::hole());

    bool b_unit = b.kind == AtomKind::Unit;
    std::vector<Atom> bparts = atom_parts(b);

    // Wrap-a-node candidates (needed when plugging b collapses a binary node):
    // replace any subtree v by Seq(_, v), Seq(v, _) or Par(_, v).
    if (b_unit) {
        std::function<void(const Atom&, const std::function<Atom(Atom)>&)> walk =
            [&](const Atom& v, const std::function<Atom(Atom)>& rebuild) {
                out.insert(rebuild(canon(
                    Atom::node(AtomKind::Seq, {Atom::hole(), v}), th)));
                out.insert(rebuild(canon(
                    Atom::node(AtomKind::Seq, {v, Atom::hole()}), th)));
                out.insert(rebuild(canon(
                    Atom::node(AtomKind::Par, {Atom::hole(), v}), th)));
                if (v.kind == AtomKind::Seq) {
                    // Par-wrap a contiguous run (the run collapses back on fill).
                    size_t k = v.kids.size();
                    for (size_t i = 0; i < k; ++i)
                        for (size_t j = i + 2; j <= k && j - i < k; ++j) {
                            std::vector<Atom> run(v.kids.begin() + i,
                                                  v.kids.begin() + j);
                            Atom wrapped = Atom::node(
                                AtomKind::Par,
                                {Atom::hole(), Atom::node(AtomKind::Seq, run)});
                            std::vector<Atom> kids(v.kids.begin(), v.kids.begin() + i);
                            kids.push_back(wrapped);
                            kids.insert(kids.end(), v.kids.begin() + j, v.kids.end());
                            out.insert(rebuild(canon(
                                Atom::node(AtomKind::Seq, std::move(kids)), th)));
                        }
                }
                if (v.kind == AtomKind::Par) {
                    // Seq-wrap a sub-multiset of parallel children.
                    size_t k = v.kids.size();
                    for (unsigned mask = 1; mask < (1u << k); ++mask) {
                        if (__builtin_popcount(mask) < 2 ||
                            __builtin_popcount(mask) == static_cast<int>(k))
                            continue;
                        std::vector<Atom> in, rem;
                        for (size_t i = 0; i < k; ++i)
                            ((mask >> i) & 1 ? in : rem).push_back(v.kids[i]);
                        Atom p = Atom::node(AtomKind::Par, in);
                        for (const Atom& wrap :
                             {Atom::node(AtomKind::Seq, {Atom::hole(), p}),
                              Atom::node(AtomKind::Seq, {p, Atom::hole()})}) {
                            std::vector<Atom> kids = rem;
                            kids.push_back(wrap);
                            out.insert(rebuild(canon(
                                Atom::node(AtomKind::Par, std::move(kids)), th)));
                        }
                    }
                }
                for (size_t i = 0; i < v.kids.size(); ++i) {
                    Atom shell = v;
                    walk(v.kids[i], [&, i, shell](Atom rep) {
                        Atom s2 = shell;
                        s2.kids[i] = std::move(rep);
                        return rebuild(canon(s2, th));
                    });
                }
            };
        walk(u, [](Atom a) { return a; });
    }

    std::function<void(const Atom&, const std::function<Atom(Atom)>&)> walk =
        [&](const Atom& v, const std::function<Atom(Atom)>& rebuild) {
            if (v.kind == AtomKind::Seq) {
                size_t k = v.kids.size();
                // Replace a contiguous run by the hole (empty runs = gaps).
                for (size_t i = 0; i <= k; ++i) {
                    for (size_t j = i; j <= k; ++j) {
                        if (i == j && !b_unit)
                            continue;
                        if (i == 0 && j == k)
                            continue;  // whole node handled via u == b
                        std::vector<Atom> kids(v.kids.begin(), v.kids.begin() + i);
                        kids.push_back(Atom::hole());
                        kids.insert(kids.end(), v.kids.begin() + j, v.kids.end());
                        out.insert(rebuild(canon(
                            Atom::node(AtomKind::Seq, std::move(kids)), th)));
                    }
                }
            }
            if (v.kind == AtomKind::Par) {
                size_t k = v.kids.size();
                // Replace a sub-multiset by the hole (empty = extra child).
                for (unsigned mask = 0; mask < (1u << k); ++mask) {
                    int pc = __builtin_popcount(mask);
                    if (pc == 0 && !b_unit)
                        continue;
                    if (pc == static_cast<int>(k))
                        continue;
                    std::vector<Atom> kids;
                    for (size_t i = 0; i < k; ++i)
                        if (!((mask >> i) & 1))
                            kids.push_back(v.kids[i]);
                    kids.push_back(Atom::hole());
                    out.insert(rebuild(canon(
                        Atom::node(AtomKind::Par, std::move(kids)), th)));
                }
            }
            for (size_t i = 0; i < v.kids.size(); ++i) {
                Atom shell = v;
                walk(v.kids[i], [&, i, shell](Atom rep) {
                    Atom s2 = shell;
                    s2.kids[i] = std::move(rep);
                    return rebuild(canon(s2, th));
                });
            }
        };
    walk(u, [](Atom a) { return a; });
    (void)bparts;
}

} // namespace

std::vector<Context> occurrences(const Atom& u, const Atom& b, const TheoryConfig& th) {
    std::vector<Context> out;
    switch (th.kind) {
    case TheoryKind::Monoid:
        word_occurrences(u, b, out);
        return out;
    case TheoryKind::CommutativeMonoid:
        bag_occurrences(u, b, out);
        return out;
    case TheoryKind::Free:
        tree_occurrences(u, b, out);
        return out;
    case TheoryKind::Bimonoid: {
        std::set<Atom> cand;
        sp_candidates(u, b, th, cand);
        for (const Atom& c : cand)
            if (c.hole_count() == 1 && apply_context(c, b, th) == u)
                out.push_back(c);
        return out;
    }
    case TheoryKind::Custom: {
        std::set<Atom> found;
        for (const Context& c : enumerate_contexts(th, atom_size(u)))
            if (apply_context(c, b, th) == u)
                found.insert(c);
        out.assign(found.begin(), found.end());
        return out;
    }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

std::string atom_to_string(const Atom& a, const TheoryConfig& th) {
    switch (a.kind) {
    case AtomKind::Unit:
        return "1";
    case AtomKind::Hole:
        return "_";
    case AtomKind::Leaf:
        return th.var_name(a.head);
    case AtomKind::Seq: {
        std::vector<std::string> parts;
        bool juxta = true;
        for (const Atom& k : a.kids) {
            std::string s = atom_to_string(k, th);
            if (k.kind == AtomKind::Par)
                s = "(" + s + ")";
            if (s.size() != 1)
                juxta = false;
            parts.push_back(std::move(s));
        }
        std::string out;
        for (size_t i = 0; i < parts.size(); ++i) {
            if (i && !juxta)
                out += ".";
            out += parts[i];
        }
        return out;
    }
    case AtomKind::Par: {
        std::string out;
        for (size_t i = 0; i < a.kids.size(); ++i) {
            if (i)
                out += "||";
            std::string s = atom_to_string(a.kids[i], th);
            if (a.kids[i].kind == AtomKind::Seq)
                s = "(" + s + ")";
            out += s;
        }
        return out;
    }
    case AtomKind::App: {
        std::string out = th.sig.name(a.head);
        if (!a.kids.empty()) {
            out += "(";
            for (size_t i = 0; i < a.kids.size(); ++i) {
                if (i)
                    out += ",";
                out += atom_to_string(a.kids[i], th);
            }
            out += ")";
        }
        return out;
    }
    }
    return "?";
}

std::string term_to_string(const Term& t, const TheoryConfig& th) {
    if (t.is_var)
        return th.var_name(t.var);
    const std::string& n = th.sig.name(t.sym);
    if (t.kids.empty())
        return n;
    if (t.kids.size() == 2 && (t.sym == th.dot || t.sym == th.par)) {
        auto wrap = [&](const Term& k) {
            std::string s = term_to_string(k, th);
            if (!k.is_var && !k.kids.empty())
                return "(" + s + ")";
            return s;
        };
        return wrap(t.kids[0]) + n + wrap(t.kids[1]);
    }
    std::string out = n + "(";
    for (size_t i = 0; i < t.kids.size(); ++i) {
        if (i)
            out += ",";
        out += term_to_string(t.kids[i], th);
    }
    out += ")";
    return out;
}

} // namespace kah
