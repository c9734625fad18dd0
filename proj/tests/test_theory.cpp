#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kah/theory.hpp"

#include <algorithm>
#include <random>
#include <set>

using namespace kah;

namespace {

Term tv(const TheoryConfig& th, const std::string& name) {
    return Term::mkvar(th.var_id(name));
}

Atom word(const TheoryConfig& th, const std::string& letters) {
    Term t = Term::app(th.unit);
    for (auto it = letters.rbegin(); it != letters.rend(); ++it)
        t = Term::app(th.dot, {Term::mkvar(th.var_id(std::string(1, *it))), t});
    return normalize(t, th);
}

// Independent oracle for enumerate_atoms: all terms with exactly n nodes.
std::vector<Term> terms_with_nodes(const TheoryConfig& th, int n) {
    std::vector<Term> out;
    if (n <= 0)
        return out;
    if (n == 1) {
        for (VarId v = 0; v < th.var_count(); ++v)
            out.push_back(Term::mkvar(v));
        for (SymId s = 0; s < th.sig.size(); ++s)
            if (th.sig.arity(s) == 0)
                out.push_back(Term::app(s));
        return out;
    }
    for (SymId s = 0; s < th.sig.size(); ++s) {
        int k = th.sig.arity(s);
        if (k == 0 || n - 1 < k)
            continue;
        std::vector<Term> tuple(k);
        std::function<void(int, int)> pick = [&](int i, int left) {
            if (i == k - 1) {
                for (const Term& c : terms_with_nodes(th, left)) {
                    tuple[i] = c;
                    out.push_back(Term::app(s, tuple));
                }
                return;
            }
            for (int take = 1; take <= left - (k - 1 - i); ++take)
                for (const Term& c : terms_with_nodes(th, take)) {
                    tuple[i] = c;
                    pick(i + 1, left - take);
                }
        };
        pick(0, n - 1);
    }
    return out;
}

std::set<Atom> oracle_atoms(const TheoryConfig& th, int bound, int node_budget) {
    std::set<Atom> got;
    for (int n = 1; n <= node_budget; ++n)
        for (const Term& t : terms_with_nodes(th, n)) {
            Atom a = normalize(t, th);
            if (atom_size(a) <= bound)
                got.insert(a);
        }
    if (th.has_unit())
        got.insert(Atom::unit());
    return got;
}

Term random_term(const TheoryConfig& th, std::mt19937_64& rng, int depth) {
    std::uniform_int_distribution<int> coin(0, 99);
    bool leaf = depth <= 0 || coin(rng) < 35;
    if (leaf) {
        int consts = 0;
        for (SymId s = 0; s < th.sig.size(); ++s)
            if (th.sig.arity(s) == 0)
                ++consts;
        std::uniform_int_distribution<int> pick(0, th.var_count() + consts - 1);
        int i = pick(rng);
        if (i < th.var_count())
            return Term::mkvar(i);
        i -= th.var_count();
        for (SymId s = 0; s < th.sig.size(); ++s)
            if (th.sig.arity(s) == 0 && i-- == 0)
                return Term::app(s);
    }
    std::vector<SymId> ops;
    for (SymId s = 0; s < th.sig.size(); ++s)
        if (th.sig.arity(s) > 0)
            ops.push_back(s);
    if (ops.empty())
        return random_term(th, rng, 0);
    SymId s = ops[std::uniform_int_distribution<size_t>(0, ops.size() - 1)(rng)];
    std::vector<Term> kids;
    for (int i = 0; i < th.sig.arity(s); ++i)
        kids.push_back(random_term(th, rng, depth - 1));
    return Term::app(s, std::move(kids));
}

} // namespace

TEST_CASE("linear-regular check on the monoid equations") {
    TheoryConfig th = TheoryConfig::monoid({"x", "y", "z"});
    SymId dot = th.dot, one = th.unit;
    VarId x = 0, y = 1, z = 2;
    std::vector<TermEquation> eqs = {
        {Term::app(dot, {Term::mkvar(x), Term::app(one)}), Term::mkvar(x)},
        {Term::app(dot, {Term::app(one), Term::mkvar(x)}), Term::mkvar(x)},
        {Term::app(dot, {Term::mkvar(x), Term::app(dot, {Term::mkvar(y), Term::mkvar(z)})}),
         Term::app(dot, {Term::app(dot, {Term::mkvar(x), Term::mkvar(y)}), Term::mkvar(z)})},
    };
    auto verdicts = check_linear_regular(eqs, th.sig);
    for (const auto& v : verdicts)
        CHECK(v.ok());
}

TEST_CASE("idempotency is not linear, x = y is not regular") {
    Signature sig;
    SymId join = sig.add("v", 2);
    TheoryConfig th = TheoryConfig::free(sig, {"x", "y"});
    std::vector<TermEquation> eqs = {
        {Term::app(join, {Term::mkvar(0), Term::mkvar(0)}), Term::mkvar(0)},
        {Term::mkvar(0), Term::mkvar(1)},
    };
    auto verdicts = check_linear_regular(eqs, th.sig);
    REQUIRE(verdicts.size() == 2);
    CHECK(verdicts[0].kind == EquationVerdict::Kind::NotLinear);
    CHECK(verdicts[0].offending_var == 0);
    CHECK(verdicts[1].kind == EquationVerdict::Kind::NotRegular);
    CHECK(verdicts[1].offending_var == 0);
}

TEST_CASE("normalize: monoid words") {
    TheoryConfig th = TheoryConfig::monoid({"x", "y", "z"});
    // (x.1).(y.z) -> xyz
    Term t = Term::app(th.dot, {Term::app(th.dot, {tv(th, "x"), Term::app(th.unit)}),
                                Term::app(th.dot, {tv(th, "y"), tv(th, "z")})});
    CHECK(normalize(t, th) == word(th, "xyz"));
    CHECK(atom_to_string(normalize(t, th), th) == "xyz");
}

TEST_CASE("normalize: commutative monoid sorts") {
    TheoryConfig th = TheoryConfig::commutative_monoid({"a", "b"});
    Term t = Term::app(th.dot, {Term::app(th.dot, {tv(th, "b"), tv(th, "a")}), tv(th, "b")});
    CHECK(normalize(t, th) == word(th, "abb"));
}

TEST_CASE("normalize: bimonoid sorts parallel children and flattens") {
    TheoryConfig th = TheoryConfig::bimonoid({"a", "b", "c"});
    Term t = Term::app(th.par, {tv(th, "a"), Term::app(th.par, {tv(th, "c"), tv(th, "b")})});
    Atom a = normalize(t, th);
    REQUIRE(a.kind == AtomKind::Par);
    REQUIRE(a.kids.size() == 3);
    CHECK(a.kids[0] == Atom::leaf(0));
    CHECK(a.kids[1] == Atom::leaf(1));
    CHECK(a.kids[2] == Atom::leaf(2));
}

TEST_CASE("normalize agrees on random representatives (built-ins)") {
    std::mt19937_64 rng(7);
    for (auto mk : {TheoryConfig::monoid, TheoryConfig::commutative_monoid,
                    TheoryConfig::bimonoid}) {
        TheoryConfig th = mk({"a", "b", "c"});
        for (int i = 0; i < 200; ++i) {
            Term t = random_term(th, rng, 4);
            Atom a = normalize(t, th);
            // idempotence via the canonical representative
            CHECK(normalize(embed(a, th), th) == a);
            // congruence: normalizing subterms first changes nothing
            if (!t.is_var && !t.kids.empty()) {
                Term t2 = t;
                for (Term& k : t2.kids)
                    k = embed(normalize(k, th), th);
                CHECK(normalize(t2, th) == a);
            }
        }
    }
}

TEST_CASE("atom size is representative-independent and units do not count") {
    std::mt19937_64 rng(11);
    TheoryConfig th = TheoryConfig::bimonoid({"a", "b"});
    for (int i = 0; i < 100; ++i) {
        Term t = random_term(th, rng, 4);
        int leaves = 0;
        std::function<void(const Term&)> count = [&](const Term& u) {
            if (u.is_var)
                ++leaves;
            for (const Term& k : u.kids)
                count(k);
        };
        count(t);
        CHECK(atom_size(normalize(t, th)) == leaves);
    }
}

TEST_CASE("enumerate_atoms: monoid over {a}, bound 2") {
    TheoryConfig th = TheoryConfig::monoid({"a"});
    auto atoms = enumerate_atoms(th, 2);
    std::set<Atom> got(atoms.begin(), atoms.end());
    std::set<Atom> expect = {Atom::unit(), word(th, "a"), word(th, "aa")};
    CHECK(got == expect);
}

TEST_CASE("enumerate_atoms matches the brute-force oracle") {
    for (auto mk : {TheoryConfig::monoid, TheoryConfig::commutative_monoid,
                    TheoryConfig::bimonoid}) {
        TheoryConfig th = mk({"a", "b"});
        for (int bound = 0; bound <= 3; ++bound) {
            auto atoms = enumerate_atoms(th, bound);
            std::set<Atom> got(atoms.begin(), atoms.end());
            CHECK(got.size() == atoms.size());  // no duplicates
            CHECK(got == oracle_atoms(th, bound, 2 * bound + 3));
        }
    }
}

TEST_CASE("enumerate_atoms: free theory by leaf count") {
    Signature sig;
    sig.add("f", 2);
    sig.add("c", 0);
    TheoryConfig th = TheoryConfig::free(sig, {"x"});
    auto a2 = enumerate_atoms(th, 2);
    // two leaf atoms plus the four f(l, r) combinations
    CHECK(a2.size() == 6);
    std::set<Atom> got(a2.begin(), a2.end());
    CHECK(got == oracle_atoms(th, 2, 5));
    auto a3 = enumerate_atoms(th, 3);
    CHECK(std::includes(a3.begin(), a3.end(), a2.begin(), a2.end()));
    std::set<Atom> got3(a3.begin(), a3.end());
    CHECK(got3 == oracle_atoms(th, 3, 7));
}

TEST_CASE("enumerate_atoms bound 0: no constants, no unit -> empty") {
    Signature sig;
    sig.add("f", 2);
    TheoryConfig th = TheoryConfig::free(sig, {"x"});
    CHECK(enumerate_atoms(th, 0).empty());
}

TEST_CASE("monotone in the bound") {
    TheoryConfig th = TheoryConfig::bimonoid({"a", "b"});
    for (int n = 0; n < 4; ++n) {
        auto small = enumerate_atoms(th, n);
        auto big = enumerate_atoms(th, n + 1);
        CHECK(std::includes(big.begin(), big.end(), small.begin(), small.end()));
    }
}

TEST_CASE("apply_context: words") {
    TheoryConfig th = TheoryConfig::monoid({"l", "r", "u", "a", "b"});
    // context (l, r)
    Context c = Atom::node(AtomKind::Seq,
                           {Atom::leaf(th.var_id("l")), Atom::hole(), Atom::leaf(th.var_id("r"))});
    CHECK(apply_context(c, Atom::leaf(th.var_id("u")), th) == word(th, "lur"));
    CHECK(apply_context(c, Atom::leaf(th.var_id("a")), th) == word(th, "lar"));
    CHECK(apply_context(c, Atom::leaf(th.var_id("b")), th) == word(th, "lbr"));
}

TEST_CASE("apply_context: multiset union") {
    TheoryConfig th = TheoryConfig::commutative_monoid({"a", "b", "c"});
    Context c = Atom::node(AtomKind::Seq, {Atom::hole(), Atom::leaf(0), Atom::leaf(1)});
    Atom n = word(th, "bc");
    CHECK(apply_context(c, n, th) == word(th, "abbc"));
}

TEST_CASE("identity context is the hole") {
    TheoryConfig th = TheoryConfig::monoid({"a"});
    Atom a = word(th, "aa");
    CHECK(apply_context(Atom::hole(), a, th) == a);
}

TEST_CASE("enumerate_contexts: monoid over {a}, bound 1") {
    TheoryConfig th = TheoryConfig::monoid({"a"});
    auto ctxs = enumerate_contexts(th, 1);
    std::set<Atom> got(ctxs.begin(), ctxs.end());
    Atom a = Atom::leaf(0);
    std::set<Atom> expect = {
        Atom::hole(),
        Atom::node(AtomKind::Seq, {a, Atom::hole()}),
        Atom::node(AtomKind::Seq, {Atom::hole(), a}),
    };
    CHECK(got == expect);
}

TEST_CASE("enumerate_contexts: free signature {f/2, c/0}, bound 1") {
    Signature sig;
    SymId f = sig.add("f", 2);
    SymId c = sig.add("c", 0);
    TheoryConfig th = TheoryConfig::free(sig, {"x"});
    auto ctxs = enumerate_contexts(th, 1);
    std::set<Atom> got(ctxs.begin(), ctxs.end());
    Atom cc = Atom::node(AtomKind::App, {}, c);
    Atom x = Atom::leaf(0);
    std::set<Atom> expect = {
        Atom::hole(),
        Atom::node(AtomKind::App, {Atom::hole(), cc}, f),
        Atom::node(AtomKind::App, {cc, Atom::hole()}, f),
        Atom::node(AtomKind::App, {Atom::hole(), x}, f),
        Atom::node(AtomKind::App, {x, Atom::hole()}, f),
    };
    CHECK(got == expect);
}

TEST_CASE("context application is well-defined across representatives") {
    TheoryConfig th = TheoryConfig::bimonoid({"a", "b"});
    auto ctxs = enumerate_contexts(th, 2);
    // two structurally different representatives of the same atom
    Term t1 = Term::app(th.par, {tv(th, "a"), tv(th, "b")});
    Term t2 = Term::app(th.par, {tv(th, "b"), Term::app(th.dot, {tv(th, "a"), Term::app(th.unit)})});
    Atom a1 = normalize(t1, th), a2 = normalize(t2, th);
    REQUIRE(a1 == a2);
    for (const Context& c : ctxs)
        CHECK(apply_context(c, a1, th) == apply_context(c, a2, th));
}

TEST_CASE("occurrences: words find every factor split") {
    TheoryConfig th = TheoryConfig::monoid({"x", "y"});
    Atom u = word(th, "xyx");
    Atom b = word(th, "x");
    auto occ = occurrences(u, b, th);
    CHECK(occ.size() == 2);
    for (const Context& c : occ)
        CHECK(apply_context(c, b, th) == u);
    // empty-word occurrences: one per gap
    CHECK(occurrences(u, Atom::unit(), th).size() == 4);
}

TEST_CASE("occurrences: multisets give at most one context") {
    TheoryConfig th = TheoryConfig::commutative_monoid({"a", "b"});
    Atom u = word(th, "aab");
    CHECK(occurrences(u, word(th, "ab"), th).size() == 1);
    CHECK(occurrences(u, word(th, "bb"), th).empty());
    Context c = occurrences(u, word(th, "ab"), th)[0];
    CHECK(apply_context(c, word(th, "ab"), th) == u);
}

TEST_CASE("occurrences: trees enumerate subtree positions") {
    Signature sig;
    SymId f = sig.add("f", 2);
    SymId c0 = sig.add("c", 0);
    TheoryConfig th = TheoryConfig::free(sig, {});
    Atom c = Atom::node(AtomKind::App, {}, c0);
    Atom fcc = Atom::node(AtomKind::App, {c, c}, f);
    Atom u = Atom::node(AtomKind::App, {fcc, c}, f);
    CHECK(occurrences(u, c, th).size() == 3);
    CHECK(occurrences(u, fcc, th).size() == 1);
    CHECK(occurrences(u, u, th).size() == 1);
}

TEST_CASE("occurrences: series-parallel completeness against brute force") {
    TheoryConfig th = TheoryConfig::bimonoid({"a", "b"});
    auto atoms = enumerate_atoms(th, 3);
    auto ctxs = enumerate_contexts(th, 3);
    for (const Atom& u : atoms) {
        if (atom_size(u) > 3)
            continue;
        for (const Atom& b : atoms) {
            std::set<Atom> expect;
            for (const Context& c : ctxs)
                if (apply_context(c, b, th) == u)
                    expect.insert(c);
            auto occ = occurrences(u, b, th);
            std::set<Atom> got(occ.begin(), occ.end());
            CHECK(got == expect);
        }
    }
}

TEST_CASE("custom theory without a normaliser rejects normalize calls") {
    Signature sig;
    SymId g = sig.add("g", 2);
    TheoryConfig th = TheoryConfig::custom(sig, {"x"}, {}, nullptr);
    Term t = Term::app(g, {Term::mkvar(0), Term::mkvar(0)});
    CHECK_THROWS_AS((void)normalize(t, th), TheoryError);
}

TEST_CASE("custom theory with a hook behaves like its built-in twin") {
    // commutative idempotent-free normaliser: sort the two children of g
    Signature sig;
    SymId g = sig.add("g", 2);
    SymId e = sig.add("e", 0);
    auto hook = [g, e](const Term& t) {
        std::function<Term(const Term&)> go = [&](const Term& u) -> Term {
            if (u.is_var || u.kids.empty())
                return u;
            // flatten g over its unit e, sort leaves
            std::vector<Term> leaves;
            std::function<void(const Term&)> collect = [&](const Term& w) {
                if (!w.is_var && w.sym == g) {
                    collect(w.kids[0]);
                    collect(w.kids[1]);
                } else if (!(!w.is_var && w.sym == e)) {
                    leaves.push_back(w);
                }
            };
            collect(u);
            if (leaves.empty())
                return Term::app(e);
            std::sort(leaves.begin(), leaves.end(), [](const Term& a, const Term& b) {
                if (a.is_var != b.is_var)
                    return a.is_var;
                return a.is_var ? a.var < b.var : a.sym < b.sym;
            });
            Term out = leaves.back();
            for (size_t i = leaves.size() - 1; i-- > 0;)
                out = Term::app(g, {leaves[i], out});
            return out;
        };
        return go(t);
    };
    TheoryConfig th = TheoryConfig::custom(sig, {"x", "y"}, {}, hook);
    Term t1 = Term::app(g, {Term::mkvar(1), Term::app(g, {Term::mkvar(0), Term::app(e)})});
    Term t2 = Term::app(g, {Term::mkvar(0), Term::mkvar(1)});
    CHECK(normalize(t1, th) == normalize(t2, th));
    auto atoms = enumerate_atoms(th, 2);
    CHECK(!atoms.empty());
}
