#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kah/gen.hpp"
#include "kah/proofs.hpp"

#include <random>

using namespace kah;

namespace {

TheoryConfig mono() { return TheoryConfig::monoid({"a", "b", "c", "d"}); }

Atom w(const TheoryConfig& th, const std::string& letters) {
    if (letters.empty())
        return Atom::unit();
    if (letters.size() == 1)
        return Atom::leaf(th.var_id(std::string(1, letters[0])));
    std::vector<Atom> kids;
    for (char ch : letters)
        kids.push_back(Atom::leaf(th.var_id(std::string(1, ch))));
    if (th.kind == TheoryKind::CommutativeMonoid)
        std::sort(kids.begin(), kids.end());
    return Atom::node(AtomKind::Seq, std::move(kids));
}

Term expr_term(const ExprPtr& e) {
    if (e->kind == ExprKind::Var)
        return Term::mkvar(e->var);
    std::vector<Term> kids;
    for (const ExprPtr& k : e->kids)
        kids.push_back(expr_term(k));
    return Term::app(e->sym, std::move(kids));
}

} // namespace

TEST_CASE("naive axiomatisation contents") {
    TheoryConfig th = mono();
    Axiomatisation q = naive_axioms(th, Fragment::KleeneStar);
    CHECK(q.find("dist-dot-1") != nullptr);   // x.(y+y') <= x.y + x.y'
    CHECK(q.find("annih-dot-1") != nullptr);  // x.0 <= 0
    CHECK(q.find("assoc-dot-lr") != nullptr);
    CHECK(q.find("comm-dot") == nullptr);  // plain monoid has no commutativity

    Signature sig;
    sig.add("f", 2);
    sig.add("c", 0);
    Axiomatisation qf = naive_axioms(TheoryConfig::free(sig, {"x"}), Fragment::Full);
    for (const AxiomSentence& s : qf.sentences)
        CHECK(s.name.rfind("eq", 0) != 0);  // no equation axioms for the free theory
    CHECK(qf.find("dist-f-0") != nullptr);
}

TEST_CASE("instance axiomatisations") {
    TheoryConfig th = mono();
    Axiomatisation left = instance_axioms("leftKA", th);
    CHECK(left.find("star-ind-l") != nullptr);
    CHECK(left.find("star-ind-r") == nullptr);

    // 1 + e.e* <= e* is the unfolding schema instance
    ExprPtr e = parse_expr("a.b", th);
    Derivation unf = d_fix_unfold(star(e, th));
    CHECK(check_derivation(left, {}, unf).ok());
    CHECK(alpha_eq(unf.concl.lhs, parse_expr("1 + (a.b).(a.b)*", th)));

    // cKA derives commutation of generators
    TheoryConfig cm = TheoryConfig::commutative_monoid({"a", "b"});
    Axiomatisation cka = instance_axioms("cKA", cm);
    Derivation comm =
        d_axiom(cka, "comm-dot-lr", {parse_expr("a", cm), parse_expr("b", cm)});
    CHECK(check_derivation(cka, {}, comm).ok());
    CHECK(alpha_eq(comm.concl.rhs, parse_expr("b.a", cm)));

    // biKA has the parallel-star unfolding
    TheoryConfig bi = TheoryConfig::bimonoid({"a"});
    Axiomatisation bika = instance_axioms("biKA", bi);
    Derivation punf = d_fix_unfold(parstar(parse_expr("a", bi), bi));
    CHECK(check_derivation(bika, {}, punf).ok());

    CHECK_THROWS_AS((void)instance_axioms("XKA", th), UsageError);
}

TEST_CASE("checker accepts axiom instances and rejects abuse") {
    TheoryConfig th = mono();
    Axiomatisation q = naive_axioms(th, Fragment::KleeneStar);
    ExprPtr a = parse_expr("a", th), b = parse_expr("b", th);

    SUBCASE("a <= a + b by instantiation") {
        Derivation d = d_axiom(q, "plus-inl", {a, b});
        CHECK(check_derivation(q, {}, d).ok());
    }
    SUBCASE("hypotheses are verbatim only") {
        HypothesisSet h = {{parse_expr("a.a", th), a}};
        Derivation ok = d_hyp(h, 0);
        CHECK(check_derivation(q, h, ok).ok());
        Derivation forged = ok;
        forged.concl = {parse_expr("b.b", th), b};
        CHECK(!check_derivation(q, h, forged).ok());
    }
    SUBCASE("transitivity middles must agree") {
        Derivation bad;
        bad.rule = Rule::Trans;
        bad.concl = {a, parse_expr("c", th)};
        bad.kids = {d_refl(a), d_refl(parse_expr("c", th))};
        CHECK(!check_derivation(q, {}, bad).ok());
    }
    SUBCASE("fragment violations are caught with a location") {
        Axiomatisation qf = naive_axioms(th, Fragment::FixpointFree);
        Derivation d = d_refl(parse_expr("a*", th));
        CheckResult r = check_derivation(qf, {}, d);
        CHECK(!r.ok());
        CHECK(r.reason.find("fragment") != std::string::npos);
    }
}

TEST_CASE("equational toolbox: canonical term derivations") {
    std::mt19937_64 rng(13);
    for (auto mk : {TheoryConfig::monoid, TheoryConfig::commutative_monoid,
                    TheoryConfig::bimonoid}) {
        TheoryConfig th = mk({"a", "b", "c"});
        Axiomatisation q = naive_axioms(th, Fragment::Full);
        ProofBuilder pb(q);
        for (int i = 0; i < 60; ++i) {
            std::function<ExprPtr(int)> gen = [&](int depth) -> ExprPtr {
                std::uniform_int_distribution<int> pick(0, 5);
                int c = depth <= 0 ? std::min(pick(rng), 3) : pick(rng);
                if (c <= 2)
                    return mk_var(c % th.var_count());
                if (c == 3)
                    return mk_one(th);
                if (c == 4 || th.par < 0)
                    return mk_dot(th, gen(depth - 1), gen(depth - 1));
                return mk_par(th, gen(depth - 1), gen(depth - 1));
            };
            ExprPtr t = gen(3);
            ExprPtr canon;
            EqDer d = pb.eq_canonical(t, &canon);
            CHECK(check_derivation(q, {}, d.le).ok());
            CHECK(check_derivation(q, {}, d.ge).ok());
            Atom atom = normalize(expr_term(t), th);
            CHECK(alpha_eq(canon, atom_to_expr(atom, th)));
            CHECK(alpha_eq(d.le.concl.lhs, t));
            CHECK(alpha_eq(d.le.concl.rhs, canon));
        }
    }
}

TEST_CASE("membership prover: spec instances") {
    TheoryConfig th = mono();
    Axiomatisation q = naive_axioms(th, Fragment::Full);
    ProofBuilder pb(q);

    SUBCASE("aa in a* via unfoldings") {
        Derivation d = prove_membership(w(th, "aa"), parse_expr("a*", th), pb);
        CHECK(check_derivation(q, {}, d).ok());
        CHECK(alpha_eq(d.concl.rhs, parse_expr("a*", th)));
        CHECK(alpha_eq(d.concl.lhs, parse_expr("a.a", th)));
    }
    SUBCASE("a <= a is reflexivity") {
        Derivation d = prove_membership(w(th, "a"), parse_expr("a", th), pb);
        CHECK(d.rule == Rule::Refl);
        CHECK(check_derivation(q, {}, d).ok());
    }
    SUBCASE("f(c,c) <= f(c+d, c)") {
        Signature sig;
        SymId f = sig.add("f", 2);
        SymId c0 = sig.add("c", 0);
        sig.add("d", 0);
        TheoryConfig tf = TheoryConfig::free(sig, {});
        Axiomatisation qf = naive_axioms(tf, Fragment::Full);
        ProofBuilder pbf(qf);
        Atom cc = Atom::node(AtomKind::App, {}, c0);
        Atom fcc = Atom::node(AtomKind::App, {cc, cc}, f);
        Derivation d = prove_membership(fcc, parse_expr("f(c + d, c)", tf), pbf);
        CHECK(check_derivation(qf, {}, d).ok());
    }
    SUBCASE("not a member") {
        CHECK_THROWS_AS(
            (void)prove_membership(w(th, "b"), parse_expr("a*", th), pb), UsageError);
    }
}

TEST_CASE("membership prover: random expressions across theories") {
    std::mt19937_64 rng(77);
    Signature sig;
    sig.add("f", 2);
    sig.add("c", 0);
    std::vector<TheoryConfig> theories = {
        mono(),
        TheoryConfig::commutative_monoid({"a", "b"}),
        TheoryConfig::bimonoid({"a", "b"}),
        TheoryConfig::free(sig, {"x"}),
    };
    for (auto& th : theories) {
        Axiomatisation q = naive_axioms(th, Fragment::Full);
        ProofBuilder pb(q);
        int proved = 0;
        for (int i = 0; i < 12; ++i) {
            ExprPtr e = random_expr(th, Fragment::Full, rng, 8);
            AtomSet atoms = lang_bounded(e, 4, th).atoms;
            int taken = 0;
            for (const Atom& a : atoms) {
                if (taken++ > 6)
                    break;
                Derivation d = prove_membership(a, e, pb);
                CHECK(check_derivation(q, {}, d).ok());
                ++proved;
            }
        }
        CHECK(proved > 0);
    }
}

TEST_CASE("sum of terms") {
    SUBCASE("a.(b+c) -> {ab, ac}") {
        TheoryConfig th = mono();
        Axiomatisation q = naive_axioms(th, Fragment::Full);
        ProofBuilder pb(q);
        SumOfTerms st = sum_of_terms(parse_expr("a.(b + c)", th), pb);
        REQUIRE(st.atoms.size() == 2);
        CHECK(st.atoms[0] == w(th, "ab"));
        CHECK(st.atoms[1] == w(th, "ac"));
        CHECK(check_derivation(q, {}, st.eq.le).ok());
        CHECK(check_derivation(q, {}, st.eq.ge).ok());
    }
    SUBCASE("a.0 -> empty sum via annihilation") {
        TheoryConfig th = mono();
        Axiomatisation q = naive_axioms(th, Fragment::Full);
        ProofBuilder pb(q);
        SumOfTerms st = sum_of_terms(parse_expr("a.0", th), pb);
        CHECK(st.atoms.empty());
        CHECK(st.sum->kind == ExprKind::Zero);
        CHECK(check_derivation(q, {}, st.eq.le).ok());
        CHECK(check_derivation(q, {}, st.eq.ge).ok());
    }
    SUBCASE("(a+b).(a+b) over the commutative theory merges ab = ba") {
        TheoryConfig th = TheoryConfig::commutative_monoid({"a", "b"});
        Axiomatisation q = naive_axioms(th, Fragment::Full);
        ProofBuilder pb(q);
        SumOfTerms st = sum_of_terms(parse_expr("(a + b).(a + b)", th), pb);
        REQUIRE(st.atoms.size() == 3);
        CHECK(st.atoms[0] == w(th, "aa"));
        CHECK(st.atoms[1] == w(th, "ab"));
        CHECK(st.atoms[2] == w(th, "bb"));
        CHECK(check_derivation(q, {}, st.eq.le).ok());
        CHECK(check_derivation(q, {}, st.eq.ge).ok());
    }
}

TEST_CASE("fixpoint-free inclusion prover") {
    SUBCASE("one hypothesis step") {
        TheoryConfig th = mono();
        Axiomatisation q = naive_axioms(th, Fragment::Full);
        ProofBuilder pb(q);
        HypothesisSet h = {{parse_expr("a.a", th), parse_expr("a", th)}};
        InclusionProof p = prove_inclusion_fixpointfree(
            parse_expr("a.a", th), parse_expr("a", th), h, pb, 6);
        REQUIRE(p.found);
        CHECK(check_derivation(q, h, p.derivation).ok());
    }
    SUBCASE("chained hypotheses over the commutative theory") {
        TheoryConfig th = TheoryConfig::commutative_monoid({"a", "c", "d", "x", "y"});
        Axiomatisation q = naive_axioms(th, Fragment::Full);
        ProofBuilder pb(q);
        HypothesisSet h = {{parse_expr("a", th), parse_expr("c.d", th)},
                           {parse_expr("c", th), parse_expr("x.y", th)}};
        InclusionProof p = prove_inclusion_fixpointfree(
            parse_expr("a", th), parse_expr("x.y.d", th), h, pb, 6);
        REQUIRE(p.found);
        CHECK(check_derivation(q, h, p.derivation).ok());
        auto r = inclusion_check(parse_expr("a", th), parse_expr("x.y.d", th), h, 4, 7, th);
        CHECK(r.holds);
    }
    SUBCASE("unprovable goals are reported as not found") {
        TheoryConfig th = mono();
        Axiomatisation q = naive_axioms(th, Fragment::Full);
        ProofBuilder pb(q);
        InclusionProof p = prove_inclusion_fixpointfree(
            parse_expr("a", th), parse_expr("b", th), {}, pb, 5);
        CHECK(!p.found);
        CHECK(p.exhausted_bound == 5);
    }
}

TEST_CASE("star toolbox under the instance axiomatisations") {
    TheoryConfig th = mono();
    Axiomatisation q = instance_axioms("KA", th);
    ProofBuilder pb(q);
    ExprPtr e = parse_expr("a.b", th);
    ExprPtr f = parse_expr("a.b + a", th);

    CHECK(check_derivation(q, {}, pb.one_le_star(e)).ok());
    CHECK(check_derivation(q, {}, pb.e_le_star(e)).ok());
    CHECK(check_derivation(q, {}, pb.prod_star_le_star(e)).ok());
    EqDer unf = pb.star_unfold_eq(e);
    CHECK(check_derivation(q, {}, unf.le).ok());
    CHECK(check_derivation(q, {}, unf.ge).ok());
    CHECK(check_derivation(q, {}, pb.star_mono(e, f, pb.le_inl(e, parse_expr("a", th)))).ok());
    CHECK(check_derivation(q, {}, pb.star_square(e)).ok());

    TheoryConfig bi = TheoryConfig::bimonoid({"a", "b"});
    Axiomatisation qb = instance_axioms("biKA", bi);
    ProofBuilder pbb(qb);
    ExprPtr g = parse_expr("a||b", bi);
    CHECK(check_derivation(qb, {}, pbb.one_le_star(g, true)).ok());
    CHECK(check_derivation(qb, {}, pbb.e_le_star(g, true)).ok());
    CHECK(check_derivation(qb, {}, pbb.star_square(g, true)).ok());
}

TEST_CASE("substitution congruence through fixpoints") {
    TheoryConfig th = mono();
    Axiomatisation q = naive_axioms(th, Fragment::Full);
    ProofBuilder pb(q);
    // theta: a -> 1.a, justified by the unit equation
    ExprPtr a = parse_expr("a", th);
    Subst theta = Subst::of_var(th.var_id("a"), parse_expr("1.a", th));
    std::map<VarId, EqDer> var_eqs;
    var_eqs.emplace(th.var_id("a"), pb.eq_equation("unitl-dot", {a}));
    for (const char* src : {"a.b", "a + b.a", "(a.b)*", "mu z. a + b.z.a", "b"}) {
        ExprPtr e = parse_expr(src, th);
        EqDer d = pb.subst_congruence(e, theta, var_eqs);
        INFO(src);
        CHECK(check_derivation(q, {}, d.le).ok());
        CHECK(check_derivation(q, {}, d.ge).ok());
        CHECK(alpha_eq(d.le.concl.lhs, substitute(e, theta)));
        CHECK(alpha_eq(d.le.concl.rhs, e));
    }
}

TEST_CASE("counter-model evaluation") {
    TheoryConfig th = TheoryConfig::monoid({"a"});
    auto ev = [&](const std::string& s) {
        return countermodel_eval(parse_expr(s, th), th);
    };
    CHECK(ev("(a*).a") == CountermodelElement::top());
    CHECK(ev("(a.a)*") == CountermodelElement::star());
    CHECK(ev("0*") == CountermodelElement::power(0));
    CHECK(ev("1*") == CountermodelElement::power(0));
    CHECK(ev("a.a") == CountermodelElement::power(2));
    CHECK(ev("(a*)*") == CountermodelElement::top());
    CHECK(ev("a*") == CountermodelElement::star());
    CHECK(ev("a* + a.a.a") == CountermodelElement::star());
    CHECK(ev("mu z. a + z") == CountermodelElement::power(1));
}

TEST_CASE("counter-model validates the naive axioms and refutes a*.a <= a*") {
    TheoryConfig th = TheoryConfig::monoid({"a"});
    CountermodelReport rep = countermodel_check(th);
    INFO(rep.detail);
    CHECK(rep.axioms_hold);
    CHECK(rep.refutation_found);
    CHECK(rep.checked_instances > 100);
}

TEST_CASE("derivation JSON round-trip") {
    TheoryConfig th = mono();
    Axiomatisation q = instance_axioms("KA", th);
    ProofBuilder pb(q);
    Derivation d = pb.star_square(parse_expr("a.b", th));
    std::string j = derivation_to_json(d, th);
    Derivation back = derivation_from_json(j, th);
    CHECK(check_derivation(q, {}, back).ok());
    CHECK(alpha_eq(back.concl.lhs, d.concl.lhs));
    CHECK(alpha_eq(back.concl.rhs, d.concl.rhs));
}

TEST_CASE("accepted derivations are never contradicted semantically") {
    std::mt19937_64 rng(123);
    TheoryConfig th = TheoryConfig::monoid({"a", "b"});
    Axiomatisation q = naive_axioms(th, Fragment::Full);
    ProofBuilder pb(q);
    for (int i = 0; i < 10; ++i) {
        ExprPtr e = random_expr(th, Fragment::KleeneStar, rng, 7);
        for (const Atom& a : lang_bounded(e, 3, th).atoms) {
            Derivation d = prove_membership(a, e, pb);
            REQUIRE(check_derivation(q, {}, d).ok());
            auto r = inclusion_check(d.concl.lhs, d.concl.rhs, {}, 4, 6, th);
            CHECK(r.holds);
        }
    }
}
