#include "kah/proofs.hpp"

#include <json.hpp>

#include <algorithm>
#include <functional>

namespace kah {

namespace {

std::string sym_tag(const TheoryConfig& th, SymId s) {
    if (s == th.dot)
        return "dot";
    if (s == th.par)
        return "par";
    if (s == th.unit)
        return "one";
    return th.sig.name(s);
}

[[noreturn]] void bad(const std::string& what) { throw StructureError(what); }

} // namespace

// ---------------------------------------------------------------------------
// Axiomatisations
// ---------------------------------------------------------------------------

const AxiomSentence* Axiomatisation::find(const std::string& axiom_name) const {
    for (const AxiomSentence& s : sentences)
        if (s.name == axiom_name)
            return &s;
    return nullptr;
}

namespace {

AxiomSentence sentence(std::string name, std::vector<Ineq> premises, Ineq concl) {
    AxiomSentence s;
    s.name = std::move(name);
    s.premises = std::move(premises);
    s.conclusion = std::move(concl);
    int m = std::max(max_meta(s.conclusion.lhs), max_meta(s.conclusion.rhs));
    for (const Ineq& p : s.premises)
        m = std::max({m, max_meta(p.lhs), max_meta(p.rhs)});
    s.metas = m + 1;
    return s;
}

// Equation terms use theory variables; axiom sentences use metas indexed by
// first occurrence on the left.
ExprPtr term_metas(const Term& t, std::map<VarId, int>& index) {
    if (t.is_var) {
        auto it = index.find(t.var);
        if (it == index.end())
            it = index.emplace(t.var, static_cast<int>(index.size())).first;
        return mk_meta(it->second);
    }
    std::vector<ExprPtr> kids;
    for (const Term& k : t.kids)
        kids.push_back(term_metas(k, index));
    return mk_sym(t.sym, std::move(kids));
}

void add_equation(Axiomatisation& q, const std::string& base, const ExprPtr& u,
                  const ExprPtr& v) {
    q.sentences.push_back(sentence(base + "-lr", {}, {u, v}));
    q.sentences.push_back(sentence(base + "-rl", {}, {v, u}));
}

void add_builtin_equations(Axiomatisation& q, const TheoryConfig& th) {
    auto m = [](int i) { return mk_meta(i); };
    auto add_monoid_ops = [&](SymId op, const std::string& tag) {
        ExprPtr one = mk_one(th);
        add_equation(q, "assoc-" + tag,
                     mk_sym(op, {mk_sym(op, {m(0), m(1)}), m(2)}),
                     mk_sym(op, {m(0), mk_sym(op, {m(1), m(2)})}));
        add_equation(q, "unitl-" + tag, mk_sym(op, {one, m(0)}), m(0));
        add_equation(q, "unitr-" + tag, mk_sym(op, {m(0), one}), m(0));
    };
    switch (th.kind) {
    case TheoryKind::Monoid:
        add_monoid_ops(th.dot, "dot");
        break;
    case TheoryKind::CommutativeMonoid:
        add_monoid_ops(th.dot, "dot");
        add_equation(q, "comm-dot", mk_sym(th.dot, {m(0), m(1)}),
                     mk_sym(th.dot, {m(1), m(0)}));
        break;
    case TheoryKind::Bimonoid:
        add_monoid_ops(th.dot, "dot");
        add_monoid_ops(th.par, "par");
        add_equation(q, "comm-par", mk_sym(th.par, {m(0), m(1)}),
                     mk_sym(th.par, {m(1), m(0)}));
        break;
    case TheoryKind::Free:
        break;
    case TheoryKind::Custom: {
        int i = 0;
        for (const TermEquation& eq : th.equations) {
            std::map<VarId, int> index;
            ExprPtr u = term_metas(eq.lhs, index);
            ExprPtr v = term_metas(eq.rhs, index);
            add_equation(q, "eq" + std::to_string(i++), u, v);
        }
        break;
    }
    }
}

} // namespace

Axiomatisation naive_axioms(const TheoryConfig& th, Fragment f) {
    Axiomatisation q;
    q.name = "naive";
    q.fragment = f;
    q.theory = th;
    auto m = [](int i) { return mk_meta(i); };

    q.sentences.push_back(sentence("zero-bot", {}, {mk_zero(), m(0)}));
    q.sentences.push_back(sentence("plus-idem", {}, {mk_plus(m(0), m(0)), m(0)}));
    q.sentences.push_back(sentence("plus-inl", {}, {m(0), mk_plus(m(0), m(1))}));
    q.sentences.push_back(sentence("plus-inr", {}, {m(1), mk_plus(m(0), m(1))}));

    for (SymId s = 0; s < th.sig.size(); ++s) {
        int n = th.sig.arity(s);
        if (n < 1)
            continue;
        std::string tag = sym_tag(th, s);
        for (int i = 0; i < n; ++i) {
            std::vector<ExprPtr> args;
            int mi = 0;
            for (int j = 0; j < n; ++j)
                args.push_back(j == i ? mk_zero() : m(mi++));
            q.sentences.push_back(sentence(
                "annih-" + tag + "-" + std::to_string(i), {},
                {mk_sym(s, args), mk_zero()}));

            std::vector<ExprPtr> lhs, la, lb;
            for (int j = 0; j < n; ++j) {
                if (j == i) {
                    lhs.push_back(mk_plus(m(n - 1), m(n)));
                    la.push_back(m(n - 1));
                    lb.push_back(m(n));
                } else {
                    int idx = j < i ? j : j - 1;
                    lhs.push_back(m(idx));
                    la.push_back(m(idx));
                    lb.push_back(m(idx));
                }
            }
            q.sentences.push_back(sentence(
                "dist-" + tag + "-" + std::to_string(i), {},
                {mk_sym(s, lhs), mk_plus(mk_sym(s, la), mk_sym(s, lb))}));
        }
    }

    add_builtin_equations(q, th);
    return q;
}

Axiomatisation instance_axioms(const std::string& name, const TheoryConfig& th) {
    auto m = [](int i) { return mk_meta(i); };
    auto star_ind_left = [&](const TheoryConfig& t) {
        // $2 + $0.$1 <= $1  ->  star($0).$2 <= $1
        return sentence("star-ind-l",
                        {{mk_plus(m(2), mk_dot(t, m(0), m(1))), m(1)}},
                        {mk_dot(t, star(m(0), t), m(2)), m(1)});
    };
    auto star_ind_right = [&](const TheoryConfig& t) {
        // $2 + $1.$0 <= $1  ->  $2.star($0) <= $1
        return sentence("star-ind-r",
                        {{mk_plus(m(2), mk_dot(t, m(1), m(0))), m(1)}},
                        {mk_dot(t, m(2), star(m(0), t)), m(1)});
    };
    auto parstar_ind = [&](const TheoryConfig& t) {
        // $2 + $1||$0 <= $1  ->  $2||parstar($0) <= $1
        return sentence("parstar-ind",
                        {{mk_plus(m(2), mk_par(t, m(1), m(0))), m(1)}},
                        {mk_par(t, m(2), parstar(m(0), t)), m(1)});
    };

    if (name == "KA" || name == "leftKA") {
        if (th.kind != TheoryKind::Monoid)
            throw UsageError(name + " expects the monoid theory");
        Axiomatisation q = naive_axioms(th, Fragment::KleeneStar);
        q.name = name;
        q.sentences.push_back(star_ind_left(th));
        if (name == "KA")
            q.sentences.push_back(star_ind_right(th));
        return q;
    }
    if (name == "cKA") {
        if (th.kind != TheoryKind::CommutativeMonoid)
            throw UsageError("cKA expects the commutative monoid theory");
        Axiomatisation q = naive_axioms(th, Fragment::KleeneStar);
        q.name = name;
        q.sentences.push_back(star_ind_left(th));
        q.sentences.push_back(star_ind_right(th));
        return q;
    }
    if (name == "biKA") {
        if (th.kind != TheoryKind::Bimonoid)
            throw UsageError("biKA expects the bimonoid theory");
        Axiomatisation q = naive_axioms(th, Fragment::BiKleene);
        q.name = name;
        q.sentences.push_back(star_ind_left(th));
        q.sentences.push_back(star_ind_right(th));
        q.sentences.push_back(parstar_ind(th));
        return q;
    }
    throw UsageError("unknown axiomatisation '" + name + "'");
}

// ---------------------------------------------------------------------------
// Derivation constructors
// ---------------------------------------------------------------------------

int Derivation::node_count() const {
    int n = 1;
    for (const Derivation& k : kids)
        n += k.node_count();
    return n;
}

Derivation d_refl(ExprPtr e) {
    Derivation d;
    d.rule = Rule::Refl;
    d.concl = {e, e};
    return d;
}

Derivation d_trans(Derivation a, Derivation b) {
    if (!alpha_eq(a.concl.rhs, b.concl.lhs))
        bad("transitivity middle terms differ");
    Derivation d;
    d.rule = Rule::Trans;
    d.concl = {a.concl.lhs, b.concl.rhs};
    d.kids = {std::move(a), std::move(b)};
    return d;
}

Derivation d_trans(std::vector<Derivation> chain) {
    if (chain.empty())
        bad("empty transitivity chain");
    Derivation d = std::move(chain[0]);
    for (size_t i = 1; i < chain.size(); ++i)
        d = d_trans(std::move(d), std::move(chain[i]));
    return d;
}

Derivation d_plus_mono(Derivation a, Derivation b) {
    Derivation d;
    d.rule = Rule::PlusMono;
    d.concl = {mk_plus(a.concl.lhs, b.concl.lhs), mk_plus(a.concl.rhs, b.concl.rhs)};
    d.kids = {std::move(a), std::move(b)};
    return d;
}

Derivation d_sym_mono(SymId s, std::vector<Derivation> kids) {
    Derivation d;
    d.rule = Rule::SymMono;
    d.sym = s;
    std::vector<ExprPtr> ls, rs;
    for (const Derivation& k : kids) {
        ls.push_back(k.concl.lhs);
        rs.push_back(k.concl.rhs);
    }
    d.concl = {mk_sym(s, ls), mk_sym(s, rs)};
    d.kids = std::move(kids);
    return d;
}

Derivation d_hyp(const HypothesisSet& h, int index) {
    if (index < 0 || index >= static_cast<int>(h.size()))
        bad("hypothesis index out of range");
    Derivation d;
    d.rule = Rule::Hyp;
    d.hyp_index = index;
    d.concl = {h[index].lhs, h[index].rhs};
    return d;
}

Derivation d_axiom(const Axiomatisation& q, const std::string& name,
                   std::vector<ExprPtr> theta, std::vector<Derivation> premises) {
    const AxiomSentence* s = q.find(name);
    if (!s)
        throw UsageError("axiomatisation '" + q.name + "' has no axiom '" + name + "'");
    if (static_cast<int>(theta.size()) != s->metas)
        bad("axiom '" + name + "' expects " + std::to_string(s->metas) +
            " instantiations");
    if (premises.size() != s->premises.size())
        bad("axiom '" + name + "' expects " + std::to_string(s->premises.size()) +
            " premises");
    for (size_t i = 0; i < premises.size(); ++i) {
        Ineq want = {instantiate(s->premises[i].lhs, theta),
                     instantiate(s->premises[i].rhs, theta)};
        if (!alpha_eq(want.lhs, premises[i].concl.lhs) ||
            !alpha_eq(want.rhs, premises[i].concl.rhs))
            bad("axiom '" + name + "' premise " + std::to_string(i) + " mismatch");
    }
    Derivation d;
    d.rule = Rule::Axiom;
    d.axiom = name;
    d.theta = std::move(theta);
    d.concl = {instantiate(s->conclusion.lhs, d.theta),
               instantiate(s->conclusion.rhs, d.theta)};
    d.kids = std::move(premises);
    return d;
}

Derivation d_fix_unfold(const ExprPtr& mu) {
    if (mu->kind != ExprKind::Mu)
        bad("fix-unfold expects a fixpoint expression");
    Derivation d;
    d.rule = Rule::Axiom;
    d.axiom = "fix-unfold";
    d.mu = mu;
    d.concl = {unfold(mu), mu};
    return d;
}

Derivation d_fix_ind(const ExprPtr& mu, const ExprPtr& f, Derivation premise) {
    if (mu->kind != ExprKind::Mu)
        bad("fix-ind expects a fixpoint expression");
    ExprPtr want = subst_rec(mu->kids[0], mu->rec, f);
    if (!alpha_eq(premise.concl.lhs, want) || !alpha_eq(premise.concl.rhs, f))
        bad("fix-ind premise mismatch");
    Derivation d;
    d.rule = Rule::Axiom;
    d.axiom = "fix-ind";
    d.mu = mu;
    d.theta = {f};
    d.concl = {mu, f};
    d.kids = {std::move(premise)};
    return d;
}

// ---------------------------------------------------------------------------
// Checker
// ---------------------------------------------------------------------------

namespace {

struct Checker {
    const Axiomatisation& q;
    const HypothesisSet& h;
    std::string failure;

    bool fail(const std::string& path, const std::string& why) {
        failure = path + ": " + why;
        return false;
    }

    bool check_expr(const std::string& path, const ExprPtr& e) {
        if (has_meta(e))
            return fail(path, "metavariable in conclusion");
        if (!is_closed(e))
            return fail(path, "open expression");
        if (!fragment_member(e, q.fragment, q.theory))
            return fail(path, "expression outside the fragment " +
                                  fragment_name(q.fragment));
        return true;
    }

    bool check(const std::string& path, const Derivation& d) {
        if (!check_expr(path, d.concl.lhs) || !check_expr(path, d.concl.rhs))
            return false;
        switch (d.rule) {
        case Rule::Refl:
            if (!d.kids.empty())
                return fail(path, "reflexivity takes no premises");
            if (!alpha_eq(d.concl.lhs, d.concl.rhs))
                return fail(path, "reflexivity with distinct sides");
            return true;
        case Rule::Hyp: {
            if (!d.kids.empty())
                return fail(path, "hypothesis rule takes no premises");
            if (d.hyp_index < 0 || d.hyp_index >= static_cast<int>(h.size()))
                return fail(path, "hypothesis index out of range");
            // used verbatim: this rule admits no substitution
            if (!alpha_eq(d.concl.lhs, h[d.hyp_index].lhs) ||
                !alpha_eq(d.concl.rhs, h[d.hyp_index].rhs))
                return fail(path, "hypothesis used non-verbatim");
            return true;
        }
        case Rule::Trans: {
            if (d.kids.size() != 2)
                return fail(path, "transitivity takes two premises");
            if (!alpha_eq(d.kids[0].concl.lhs, d.concl.lhs) ||
                !alpha_eq(d.kids[1].concl.rhs, d.concl.rhs) ||
                !alpha_eq(d.kids[0].concl.rhs, d.kids[1].concl.lhs))
                return fail(path, "transitivity middle term mismatch");
            break;
        }
        case Rule::PlusMono: {
            if (d.kids.size() != 2)
                return fail(path, "plus monotonicity takes two premises");
            if (!alpha_eq(d.concl.lhs,
                          mk_plus(d.kids[0].concl.lhs, d.kids[1].concl.lhs)) ||
                !alpha_eq(d.concl.rhs,
                          mk_plus(d.kids[0].concl.rhs, d.kids[1].concl.rhs)))
                return fail(path, "plus monotonicity conclusion mismatch");
            break;
        }
        case Rule::SymMono: {
            if (d.sym < 0 || d.sym >= q.theory.sig.size())
                return fail(path, "unknown symbol");
            if (static_cast<int>(d.kids.size()) != q.theory.sig.arity(d.sym))
                return fail(path, "symbol monotonicity arity mismatch");
            std::vector<ExprPtr> ls, rs;
            for (const Derivation& k : d.kids) {
                ls.push_back(k.concl.lhs);
                rs.push_back(k.concl.rhs);
            }
            if (!alpha_eq(d.concl.lhs, mk_sym(d.sym, ls)) ||
                !alpha_eq(d.concl.rhs, mk_sym(d.sym, rs)))
                return fail(path, "symbol monotonicity conclusion mismatch");
            break;
        }
        case Rule::Axiom: {
            if (d.axiom == "fix-unfold" || d.axiom == "fix-ind") {
                if (!q.fixpoint_schemas)
                    return fail(path, "fixpoint schemas unavailable");
                if (!d.mu || d.mu->kind != ExprKind::Mu)
                    return fail(path, "schema instance without a fixpoint");
                if (!check_expr(path, d.mu))
                    return false;
                if (d.axiom == "fix-unfold") {
                    if (!d.kids.empty() || !d.theta.empty())
                        return fail(path, "fix-unfold takes no premises");
                    if (!alpha_eq(d.concl.lhs, unfold(d.mu)) ||
                        !alpha_eq(d.concl.rhs, d.mu))
                        return fail(path, "fix-unfold conclusion mismatch");
                    return true;
                }
                if (d.theta.size() != 1 || d.kids.size() != 1)
                    return fail(path, "fix-ind takes one instantiation and one premise");
                const ExprPtr& f = d.theta[0];
                if (!check_expr(path, f))
                    return false;
                ExprPtr want = subst_rec(d.mu->kids[0], d.mu->rec, f);
                if (!alpha_eq(d.kids[0].concl.lhs, want) ||
                    !alpha_eq(d.kids[0].concl.rhs, f))
                    return fail(path, "fix-ind premise mismatch");
                if (!alpha_eq(d.concl.lhs, d.mu) || !alpha_eq(d.concl.rhs, f))
                    return fail(path, "fix-ind conclusion mismatch");
                break;
            }
            const AxiomSentence* s = q.find(d.axiom);
            if (!s)
                return fail(path, "unknown axiom '" + d.axiom + "'");
            if (static_cast<int>(d.theta.size()) != s->metas)
                return fail(path, "instantiation arity mismatch");
            for (const ExprPtr& t : d.theta)
                if (!check_expr(path, t))
                    return false;
            if (d.kids.size() != s->premises.size())
                return fail(path, "premise count mismatch");
            for (size_t i = 0; i < d.kids.size(); ++i) {
                if (!alpha_eq(d.kids[i].concl.lhs,
                              instantiate(s->premises[i].lhs, d.theta)) ||
                    !alpha_eq(d.kids[i].concl.rhs,
                              instantiate(s->premises[i].rhs, d.theta)))
                    return fail(path, "premise " + std::to_string(i) + " mismatch");
            }
            if (!alpha_eq(d.concl.lhs, instantiate(s->conclusion.lhs, d.theta)) ||
                !alpha_eq(d.concl.rhs, instantiate(s->conclusion.rhs, d.theta)))
                return fail(path, "axiom conclusion mismatch");
            break;
        }
        }
        for (size_t i = 0; i < d.kids.size(); ++i)
            if (!check(path + "." + std::to_string(i), d.kids[i]))
                return false;
        return true;
    }
};

} // namespace

CheckResult check_derivation(const Axiomatisation& q, const HypothesisSet& h,
                             const Derivation& d) {
    Checker c{q, h, {}};
    CheckResult r;
    r.accepted = c.check("root", d);
    r.reason = c.failure;
    return r;
}

// ---------------------------------------------------------------------------
// Equational layer
// ---------------------------------------------------------------------------

EqDer eq_refl(ExprPtr e) { return {d_refl(e), d_refl(std::move(e))}; }
EqDer eq_sym(EqDer d) { return {std::move(d.ge), std::move(d.le)}; }
EqDer eq_trans(EqDer a, EqDer b) {
    return {d_trans(a.le, b.le), d_trans(std::move(b.ge), std::move(a.ge))};
}
EqDer eq_plus_cong(EqDer a, EqDer b) {
    return {d_plus_mono(a.le, b.le), d_plus_mono(std::move(a.ge), std::move(b.ge))};
}
EqDer eq_sym_cong(SymId s, std::vector<EqDer> kids) {
    std::vector<Derivation> les, ges;
    for (EqDer& k : kids) {
        les.push_back(std::move(k.le));
        ges.push_back(std::move(k.ge));
    }
    return {d_sym_mono(s, std::move(les)), d_sym_mono(s, std::move(ges))};
}

// ---------------------------------------------------------------------------
// ProofBuilder: semilattice helpers
// ---------------------------------------------------------------------------

Derivation ProofBuilder::le_zero(ExprPtr e) const {
    return d_axiom(q_, "zero-bot", {std::move(e)});
}
Derivation ProofBuilder::le_idem(ExprPtr e) const {
    return d_axiom(q_, "plus-idem", {std::move(e)});
}
Derivation ProofBuilder::le_inl(ExprPtr e, ExprPtr f) const {
    return d_axiom(q_, "plus-inl", {std::move(e), std::move(f)});
}
Derivation ProofBuilder::le_inr(ExprPtr e, ExprPtr f) const {
    return d_axiom(q_, "plus-inr", {std::move(e), std::move(f)});
}

Derivation ProofBuilder::le_into_sum(const ExprPtr& part, const ExprPtr& sum) const {
    if (alpha_eq(part, sum))
        return d_refl(part);
    if (sum->kind != ExprKind::Plus)
        throw UsageError("addend not found in sum");
    const ExprPtr& head = sum->kids[0];
    const ExprPtr& rest = sum->kids[1];
    if (alpha_eq(part, head))
        return le_inl(head, rest);
    return d_trans(le_into_sum(part, rest), le_inr(head, rest));
}

Derivation ProofBuilder::le_sum(
    const ExprPtr& sum, const ExprPtr& target,
    const std::function<Derivation(const ExprPtr&)>& each) const {
    if (sum->kind == ExprKind::Zero)
        return le_zero(target);
    if (sum->kind == ExprKind::Plus) {
        Derivation a = le_sum(sum->kids[0], target, each);
        Derivation b = le_sum(sum->kids[1], target, each);
        return d_trans(d_plus_mono(std::move(a), std::move(b)), le_idem(target));
    }
    return each(sum);
}

EqDer ProofBuilder::eq_equation(const std::string& base_name,
                                std::vector<ExprPtr> theta) const {
    return {d_axiom(q_, base_name + "-lr", theta),
            d_axiom(q_, base_name + "-rl", std::move(theta))};
}

// ---------------------------------------------------------------------------
// Spine normalisation (associativity, units, optional commutativity)
// ---------------------------------------------------------------------------

namespace {

bool is_unit_expr(const ExprPtr& e, const TheoryConfig& th) {
    return e->kind == ExprKind::Sym && e->sym == th.unit && e->kids.empty();
}

struct SpineCtx {
    const ProofBuilder& pb;
    SymId op;
    std::string tag;

    // canonical flatten of op(u, v) for already-flat u and v
    EqDer join(const ExprPtr& u, const ExprPtr& v, ExprPtr* out) const {
        const TheoryConfig& th = pb.theory();
        if (is_unit_expr(u, th)) {
            *out = v;
            return pb.eq_equation("unitl-" + tag, {v});
        }
        if (is_unit_expr(v, th)) {
            *out = u;
            return pb.eq_equation("unitr-" + tag, {u});
        }
        if (u->kind == ExprKind::Sym && u->sym == op) {
            const ExprPtr& x = u->kids[0];
            const ExprPtr& rest = u->kids[1];
            EqDer assoc = pb.eq_equation("assoc-" + tag, {x, rest, v});
            ExprPtr inner;
            EqDer sub = join(rest, v, &inner);
            EqDer cong = eq_sym_cong(op, {eq_refl(x), sub});
            *out = mk_sym(op, {x, inner});
            return eq_trans(assoc, cong);
        }
        *out = mk_sym(op, {u, v});
        return eq_refl(*out);
    }

    // flatten + unit removal, right-nested; factors collected in order
    EqDer norm(const ExprPtr& e, ExprPtr* out, std::vector<ExprPtr>* factors) const {
        const TheoryConfig& th = pb.theory();
        if (is_unit_expr(e, th)) {
            *out = e;
            return eq_refl(e);
        }
        if (e->kind == ExprKind::Sym && e->sym == op) {
            ExprPtr cu, cv;
            std::vector<ExprPtr> fu, fv;
            EqDer du = norm(e->kids[0], &cu, &fu);
            EqDer dv = norm(e->kids[1], &cv, &fv);
            EqDer cong = eq_sym_cong(op, {du, dv});
            ExprPtr joined;
            EqDer dj = join(cu, cv, &joined);
            *out = joined;
            factors->insert(factors->end(), fu.begin(), fu.end());
            factors->insert(factors->end(), fv.begin(), fv.end());
            return eq_trans(cong, dj);
        }
        *out = e;
        factors->push_back(e);
        return eq_refl(e);
    }

    // swap the two head factors of a right-nested spine
    EqDer swap_head(const ExprPtr& e, ExprPtr* out) const {
        if (e->kind != ExprKind::Sym || e->sym != op)
            throw StructureError("swap on a non-product");
        const ExprPtr& f0 = e->kids[0];
        const ExprPtr& tail = e->kids[1];
        if (tail->kind == ExprKind::Sym && tail->sym == op) {
            const ExprPtr& f1 = tail->kids[0];
            const ExprPtr& rest = tail->kids[1];
            EqDer a1 = eq_sym(pb.eq_equation("assoc-" + tag, {f0, f1, rest}));
            EqDer c = eq_sym_cong(
                op, {pb.eq_equation("comm-" + tag, {f0, f1}), eq_refl(rest)});
            EqDer a2 = pb.eq_equation("assoc-" + tag, {f1, f0, rest});
            *out = mk_sym(op, {f1, mk_sym(op, {f0, rest})});
            return eq_trans(eq_trans(a1, c), a2);
        }
        *out = mk_sym(op, {tail, f0});
        return pb.eq_equation("comm-" + tag, {f0, tail});
    }

    // bubble sort the right-nested spine by `less`
    EqDer sort(const ExprPtr& e, int count,
               const std::function<bool(const ExprPtr&, const ExprPtr&)>& less,
               ExprPtr* out) const {
        EqDer acc = eq_refl(e);
        ExprPtr cur = e;
        for (int pass = 0; pass + 1 < count; ++pass) {
            for (int i = 0; i + 1 < count; ++i) {
                std::function<EqDer(const ExprPtr&, int, ExprPtr*)> at =
                    [&](const ExprPtr& node, int depth, ExprPtr* o) -> EqDer {
                    if (depth == 0) {
                        const ExprPtr& a = node->kids[0];
                        ExprPtr b = node->kids[1]->kind == ExprKind::Sym &&
                                            node->kids[1]->sym == op
                                        ? node->kids[1]->kids[0]
                                        : node->kids[1];
                        if (!less(b, a)) {
                            *o = node;
                            return eq_refl(node);
                        }
                        return swap_head(node, o);
                    }
                    ExprPtr inner;
                    EqDer sub = at(node->kids[1], depth - 1, &inner);
                    *o = mk_sym(op, {node->kids[0], inner});
                    return eq_sym_cong(op, {eq_refl(node->kids[0]), sub});
                };
                ExprPtr next;
                EqDer step = at(cur, i, &next);
                acc = eq_trans(acc, step);
                cur = next;
            }
        }
        *out = cur;
        return acc;
    }
};

Term expr_to_term(const ExprPtr& e, const TheoryConfig& th) {
    if (e->kind == ExprKind::Var)
        return Term::mkvar(e->var);
    if (e->kind == ExprKind::Sym) {
        std::vector<Term> kids;
        for (const ExprPtr& k : e->kids)
            kids.push_back(expr_to_term(k, th));
        return Term::app(e->sym, std::move(kids));
    }
    throw UsageError("expression is not term-shaped");
}

} // namespace

EqDer ProofBuilder::eq_spine(const ExprPtr& e, SymId op, bool sorted,
                             ExprPtr* canon_out) const {
    SpineCtx ctx{*this, op, sym_tag(theory(), op)};
    ExprPtr flat;
    std::vector<ExprPtr> factors;
    EqDer d = ctx.norm(e, &flat, &factors);
    if (sorted && factors.size() > 1) {
        ExprPtr sortedExpr;
        EqDer ds = ctx.sort(flat, static_cast<int>(factors.size()),
                            [](const ExprPtr& a, const ExprPtr& b) {
                                return alpha_cmp(a, b) < 0;
                            },
                            &sortedExpr);
        d = eq_trans(d, ds);
        flat = sortedExpr;
    }
    if (canon_out)
        *canon_out = flat;
    return d;
}

EqDer ProofBuilder::eq_prod_perm(const ExprPtr& a, const ExprPtr& b, SymId op,
                                 bool commutative) const {
    ExprPtr ca, cb;
    EqDer da = eq_spine(a, op, commutative, &ca);
    EqDer db = eq_spine(b, op, commutative, &cb);
    if (!alpha_eq(ca, cb))
        throw UsageError("products do not share a factor multiset");
    return eq_trans(da, eq_sym(db));
}

// ---------------------------------------------------------------------------
// Canonical term derivations
// ---------------------------------------------------------------------------

EqDer ProofBuilder::eq_canonical(const ExprPtr& e, ExprPtr* canon_out) const {
    const TheoryConfig& th = theory();
    if (th.kind == TheoryKind::Custom)
        throw TheoryError("canonical derivations are unavailable for custom theories");
    switch (e->kind) {
    case ExprKind::Var:
        if (canon_out)
            *canon_out = e;
        return eq_refl(e);
    case ExprKind::Sym: {
        if (th.kind == TheoryKind::Free) {
            if (e->kids.empty()) {
                if (canon_out)
                    *canon_out = e;
                return eq_refl(e);
            }
            std::vector<EqDer> kids;
            std::vector<ExprPtr> ck;
            for (const ExprPtr& k : e->kids) {
                ExprPtr c;
                kids.push_back(eq_canonical(k, &c));
                ck.push_back(c);
            }
            if (canon_out)
                *canon_out = mk_sym(e->sym, ck);
            return eq_sym_cong(e->sym, std::move(kids));
        }
        if (e->sym == th.unit) {
            if (canon_out)
                *canon_out = e;
            return eq_refl(e);
        }
        if (e->sym != th.dot && e->sym != th.par)
            throw UsageError("unexpected symbol in a term");
        std::vector<EqDer> kids;
        std::vector<ExprPtr> ck;
        for (const ExprPtr& k : e->kids) {
            ExprPtr c;
            kids.push_back(eq_canonical(k, &c));
            ck.push_back(c);
        }
        EqDer cong = eq_sym_cong(e->sym, std::move(kids));
        ExprPtr folded = mk_sym(e->sym, ck);
        bool sorted = (e->sym == th.dot && th.kind == TheoryKind::CommutativeMonoid) ||
                      e->sym == th.par;
        SpineCtx ctx{*this, e->sym, sym_tag(th, e->sym)};
        ExprPtr flat;
        std::vector<ExprPtr> factors;
        EqDer d = ctx.norm(folded, &flat, &factors);
        if (sorted && factors.size() > 1) {
            // order factors by the atoms they denote, matching atom embedding
            ExprPtr sortedExpr;
            EqDer ds = ctx.sort(
                flat, static_cast<int>(factors.size()),
                [&](const ExprPtr& x, const ExprPtr& y) {
                    return normalize(expr_to_term(x, th), th) <
                           normalize(expr_to_term(y, th), th);
                },
                &sortedExpr);
            d = eq_trans(d, ds);
            flat = sortedExpr;
        }
        if (canon_out)
            *canon_out = flat;
        return eq_trans(cong, d);
    }
    default:
        throw UsageError("expression is not term-shaped");
    }
}

EqDer ProofBuilder::eq_terms(const Term& t1, const Term& t2) const {
    ExprPtr c1, c2;
    EqDer d1 = eq_canonical(term_to_expr(t1), &c1);
    EqDer d2 = eq_canonical(term_to_expr(t2), &c2);
    if (!alpha_eq(c1, c2))
        throw UsageError("terms are not equal modulo the theory");
    return eq_trans(d1, eq_sym(d2));
}

// ---------------------------------------------------------------------------
// Star toolbox
// ---------------------------------------------------------------------------

namespace {
ExprPtr mk_op(const TheoryConfig& th, bool parallel, ExprPtr a, ExprPtr b) {
    return parallel ? mk_par(th, std::move(a), std::move(b))
                    : mk_dot(th, std::move(a), std::move(b));
}
ExprPtr mk_star(const TheoryConfig& th, bool parallel, ExprPtr e) {
    return parallel ? parstar(std::move(e), th) : star(std::move(e), th);
}
} // namespace

Derivation ProofBuilder::one_le_star(const ExprPtr& e, bool parallel) const {
    const TheoryConfig& th = theory();
    ExprPtr st = mk_star(th, parallel, e);
    ExprPtr prod = mk_op(th, parallel, e, st);
    return d_trans(le_inl(mk_one(th), prod), d_fix_unfold(st));
}

Derivation ProofBuilder::prod_star_le_star(const ExprPtr& e, bool parallel) const {
    const TheoryConfig& th = theory();
    ExprPtr st = mk_star(th, parallel, e);
    ExprPtr prod = mk_op(th, parallel, e, st);
    return d_trans(le_inr(mk_one(th), prod), d_fix_unfold(st));
}

Derivation ProofBuilder::e_le_star(const ExprPtr& e, bool parallel) const {
    const TheoryConfig& th = theory();
    std::string tag = parallel ? "par" : "dot";
    Derivation pad = eq_equation("unitr-" + tag, {e}).ge;  // e <= e.1
    Derivation grow = d_sym_mono(parallel ? th.par : th.dot,
                                 {d_refl(e), one_le_star(e, parallel)});
    return d_trans({std::move(pad), std::move(grow), prod_star_le_star(e, parallel)});
}

EqDer ProofBuilder::star_unfold_eq(const ExprPtr& e, bool parallel) const {
    const TheoryConfig& th = theory();
    ExprPtr st = mk_star(th, parallel, e);
    ExprPtr rhs = mk_plus(mk_one(th), mk_op(th, parallel, e, st));
    Derivation ge = d_fix_unfold(st);
    Derivation premise =
        d_plus_mono(d_refl(mk_one(th)),
                    d_sym_mono(parallel ? th.par : th.dot,
                               {d_refl(e), d_fix_unfold(st)}));
    // premise: 1 + e.(1 + e.star) <= 1 + e.star
    Derivation le = d_fix_ind(st, rhs, std::move(premise));
    return {std::move(le), std::move(ge)};
}

Derivation ProofBuilder::star_le(const ExprPtr& e, const ExprPtr& f,
                                 Derivation premise, bool parallel) const {
    ExprPtr st = mk_star(theory(), parallel, e);
    return d_fix_ind(st, f, std::move(premise));
}

Derivation ProofBuilder::star_mono(const ExprPtr& e, const ExprPtr& f,
                                   Derivation e_le_f, bool parallel) const {
    const TheoryConfig& th = theory();
    ExprPtr stf = mk_star(th, parallel, f);
    Derivation premise = d_plus_mono(
        d_refl(mk_one(th)),
        d_sym_mono(parallel ? th.par : th.dot, {std::move(e_le_f), d_refl(stf)}));
    Derivation chain = d_trans(std::move(premise), d_fix_unfold(stf));
    return star_le(e, stf, std::move(chain), parallel);
}

Derivation ProofBuilder::star_square(const ExprPtr& e, bool parallel) const {
    const TheoryConfig& th = theory();
    ExprPtr st = mk_star(th, parallel, e);
    if (!parallel) {
        // star-ind-l with h = star: premise star + e.star <= star
        Derivation premise =
            d_trans(d_plus_mono(d_refl(st), prod_star_le_star(e, false)),
                    le_idem(st));
        return d_axiom(q_, "star-ind-l", {e, st, st}, {std::move(premise)});
    }
    // parstar-ind with h = star: premise star + star||e <= star
    Derivation body =
        d_trans(eq_equation("comm-par", {st, e}).le, prod_star_le_star(e, true));
    Derivation premise = d_trans(d_plus_mono(d_refl(st), std::move(body)), le_idem(st));
    return d_axiom(q_, "parstar-ind", {e, st, st}, {std::move(premise)});
}

// ---------------------------------------------------------------------------
// Directed congruence / substitution congruence
// ---------------------------------------------------------------------------

Derivation ProofBuilder::cong_le(
    const ExprPtr& a, const ExprPtr& b,
    const std::function<std::optional<Derivation>(const ExprPtr&, const ExprPtr&)>&
        leaf) const {
    if (alpha_eq(a, b))
        return d_refl(a);
    if (auto d = leaf(a, b))
        return *d;
    if (a->kind != b->kind)
        throw UsageError("congruence on differently shaped expressions");
    switch (a->kind) {
    case ExprKind::Plus:
        return d_plus_mono(cong_le(a->kids[0], b->kids[0], leaf),
                           cong_le(a->kids[1], b->kids[1], leaf));
    case ExprKind::Sym: {
        if (a->sym != b->sym)
            throw UsageError("congruence on different symbols");
        std::vector<Derivation> kids;
        for (size_t i = 0; i < a->kids.size(); ++i)
            kids.push_back(cong_le(a->kids[i], b->kids[i], leaf));
        return d_sym_mono(a->sym, std::move(kids));
    }
    case ExprKind::Mu: {
        // a <= b by induction: body_a[x := b] <= body_b[x := b] <= b
        ExprPtr plug_a = subst_rec(a->kids[0], a->rec, b);
        ExprPtr plug_b = subst_rec(b->kids[0], b->rec, b);
        Derivation inner = cong_le(plug_a, plug_b, leaf);
        Derivation premise = d_trans(std::move(inner), d_fix_unfold(b));
        return d_fix_ind(a, b, std::move(premise));
    }
    default:
        throw UsageError("congruence stuck at a leaf");
    }
}

EqDer ProofBuilder::subst_congruence(const ExprPtr& e, const Subst& theta,
                                     const std::map<VarId, EqDer>& var_eqs) const {
    ExprPtr applied = substitute(e, theta);
    auto leaf_le = [&](const ExprPtr& u, const ExprPtr& v) -> std::optional<Derivation> {
        if (v->kind == ExprKind::Var) {
            auto it = var_eqs.find(v->var);
            if (it != var_eqs.end() && alpha_eq(u, substitute(v, theta)))
                return it->second.le;
        }
        return std::nullopt;
    };
    auto leaf_ge = [&](const ExprPtr& u, const ExprPtr& v) -> std::optional<Derivation> {
        if (u->kind == ExprKind::Var) {
            auto it = var_eqs.find(u->var);
            if (it != var_eqs.end() && alpha_eq(v, substitute(u, theta)))
                return it->second.ge;
        }
        return std::nullopt;
    };
    return {cong_le(applied, e, leaf_le), cong_le(e, applied, leaf_ge)};
}

// ---------------------------------------------------------------------------
// Context application at the expression level
// ---------------------------------------------------------------------------

ExprPtr context_apply_expr(const Context& c, const ExprPtr& e, const TheoryConfig& th) {
    switch (c.kind) {
    case AtomKind::Hole:
        return e;
    case AtomKind::Unit:
        return mk_one(th);
    case AtomKind::Leaf:
        return mk_var(c.head);
    case AtomKind::Seq:
    case AtomKind::Par: {
        SymId op = c.kind == AtomKind::Seq ? th.dot : th.par;
        ExprPtr out = context_apply_expr(c.kids.back(), e, th);
        for (size_t i = c.kids.size() - 1; i-- > 0;)
            out = mk_sym(op, {context_apply_expr(c.kids[i], e, th), out});
        return out;
    }
    case AtomKind::App: {
        std::vector<ExprPtr> kids;
        for (const Atom& k : c.kids)
            kids.push_back(context_apply_expr(k, e, th));
        return mk_sym(c.head, std::move(kids));
    }
    }
    throw StructureError("bad context");
}

Derivation ProofBuilder::under_context(const Context& c, Derivation d) const {
    const TheoryConfig& th = theory();
    switch (c.kind) {
    case AtomKind::Hole:
        return d;
    case AtomKind::Unit:
        return d_refl(mk_one(th));
    case AtomKind::Leaf:
        return d_refl(mk_var(c.head));
    case AtomKind::Seq:
    case AtomKind::Par: {
        SymId op = c.kind == AtomKind::Seq ? th.dot : th.par;
        Derivation out = under_context(c.kids.back(), d);
        for (size_t i = c.kids.size() - 1; i-- > 0;)
            out = d_sym_mono(op, {under_context(c.kids[i], d), std::move(out)});
        return out;
    }
    case AtomKind::App: {
        std::vector<Derivation> kids;
        for (const Atom& k : c.kids)
            kids.push_back(under_context(k, d));
        return d_sym_mono(c.head, std::move(kids));
    }
    }
    throw StructureError("bad context");
}

// ---------------------------------------------------------------------------
// Membership prover
// ---------------------------------------------------------------------------

namespace {

struct MembershipProver {
    const ProofBuilder& pb;
    const TheoryConfig& th;
    // language substitution: recursion variables denote the current stage
    Subst sem;
    // conclusion substitution: recursion variables denote their fixpoints
    Subst concl;
    // per recursion variable: proofs for atoms of earlier stages
    std::map<std::string, std::map<Atom, Derivation>> stages;

    explicit MembershipProver(const ProofBuilder& pb_) : pb(pb_), th(pb_.theory()) {}

    AtomSet lang(const ExprPtr& e, int bound) {
        return lang_bounded(substitute(e, sem), bound, th).atoms;
    }

    Derivation prove(const Atom& a, const ExprPtr& e) {
        int size = atom_size(a);
        switch (e->kind) {
        case ExprKind::Var:
            if (!(a == Atom::leaf(e->var)))
                bad("membership: variable mismatch");
            return d_refl(mk_var(e->var));
        case ExprKind::Zero:
            bad("membership in the empty language");
        case ExprKind::RecVar: {
            auto scope = stages.find(e->rec);
            if (scope == stages.end())
                bad("membership: unbound recursion variable");
            auto it = scope->second.find(a);
            if (it == scope->second.end())
                bad("membership: atom missing from the stage");
            return it->second;
        }
        case ExprKind::Plus: {
            if (lang(e->kids[0], size).count(a)) {
                Derivation d = prove(a, e->kids[0]);
                ExprPtr l = substitute(e->kids[0], concl);
                ExprPtr r = substitute(e->kids[1], concl);
                return d_trans(std::move(d), pb.le_inl(l, r));
            }
            if (lang(e->kids[1], size).count(a)) {
                Derivation d = prove(a, e->kids[1]);
                ExprPtr l = substitute(e->kids[0], concl);
                ExprPtr r = substitute(e->kids[1], concl);
                return d_trans(std::move(d), pb.le_inr(l, r));
            }
            bad("membership: atom in neither summand");
        }
        case ExprKind::Sym: {
            int n = static_cast<int>(e->kids.size());
            if (n == 0) {
                if (!(a == apply_symbol(e->sym, {}, th)))
                    bad("membership: constant mismatch");
                return d_refl(mk_sym(e->sym, {}));
            }
            std::vector<AtomSet> langs;
            for (const ExprPtr& k : e->kids)
                langs.push_back(lang(k, size));
            std::vector<Atom> tuple(n);
            std::function<bool(int, int)> pick = [&](int i, int budget) {
                if (i == n)
                    return apply_symbol(e->sym, tuple, th) == a;
                for (const Atom& cand : langs[i]) {
                    int sz = atom_size(cand);
                    if (sz > budget)
                        continue;
                    tuple[i] = cand;
                    if (pick(i + 1, budget - sz))
                        return true;
                }
                return false;
            };
            if (!pick(0, size))
                bad("membership: no decomposition found");
            std::vector<Derivation> kids;
            for (int i = 0; i < n; ++i)
                kids.push_back(prove(tuple[i], e->kids[i]));
            return d_sym_mono(e->sym, std::move(kids));
        }
        case ExprKind::Mu: {
            ExprPtr muc = substitute(e, concl);
            const std::string& y = e->rec;
            auto find_opt = [](auto& m, const std::string& k) {
                auto it = m.find(k);
                return it == m.end() ? std::nullopt
                                     : std::optional(it->second);
            };
            auto save_sem = find_opt(sem.rmap, y);
            auto save_concl = find_opt(concl.rmap, y);
            auto save_stage = find_opt(stages, y);
            concl.rmap[y] = muc;
            stages[y] = {};
            Derivation result;
            bool found = false;
            while (!found) {
                std::vector<ExprPtr> stage_exprs;
                for (const auto& [atom, dv] : stages[y])
                    stage_exprs.push_back(atom_to_expr(atom, th));
                sem.rmap[y] = mk_sum(stage_exprs);
                AtomSet next = lang(e->kids[0], size);
                bool grew = false;
                for (const Atom& u : next) {
                    if (stages[y].count(u))
                        continue;
                    Derivation du = prove(u, e->kids[0]);
                    Derivation step = d_trans(std::move(du), d_fix_unfold(muc));
                    stages[y].emplace(u, std::move(step));
                    grew = true;
                }
                if (stages[y].count(a)) {
                    result = stages[y].at(a);
                    found = true;
                } else if (!grew) {
                    bad("membership: atom not in the fixpoint language");
                }
            }
            if (save_sem)
                sem.rmap[y] = *save_sem;
            else
                sem.rmap.erase(y);
            if (save_concl)
                concl.rmap[y] = *save_concl;
            else
                concl.rmap.erase(y);
            if (save_stage)
                stages[y] = *save_stage;
            else
                stages.erase(y);
            return result;
        }
        case ExprKind::Meta:
            bad("membership: metavariable");
        }
        bad("membership: bad expression");
    }
};

} // namespace

Derivation prove_membership(const Atom& a, const ExprPtr& e, const ProofBuilder& pb) {
    const TheoryConfig& th = pb.theory();
    if (!lang_bounded(e, atom_size(a), th).atoms.count(a))
        throw UsageError("atom is not in the expression's language");
    MembershipProver mp(pb);
    Derivation d = mp.prove(a, e);
    ExprPtr canon_rep = atom_to_expr(a, th);
    if (alpha_eq(canon_rep, d.concl.lhs))
        return d;
    EqDer glue = pb.eq_terms(expr_to_term(canon_rep, th), expr_to_term(d.concl.lhs, th));
    return d_trans(glue.le, std::move(d));
}

// ---------------------------------------------------------------------------
// Sum-of-terms for fixpoint-free expressions
// ---------------------------------------------------------------------------

namespace {

// e <= target, where target is the right-nested sum of canonical atoms
Derivation expand_to_sum(const ExprPtr& e, const ExprPtr& target,
                         const ProofBuilder& pb) {
    const TheoryConfig& th = pb.theory();
    switch (e->kind) {
    case ExprKind::Zero:
        return pb.le_zero(target);
    case ExprKind::Var:
        return pb.le_into_sum(e, target);
    case ExprKind::Plus: {
        Derivation a = expand_to_sum(e->kids[0], target, pb);
        Derivation b = expand_to_sum(e->kids[1], target, pb);
        return d_trans(d_plus_mono(std::move(a), std::move(b)), pb.le_idem(target));
    }
    case ExprKind::Sym: {
        int n = static_cast<int>(e->kids.size());
        if (n == 0)
            return pb.le_into_sum(e, target);
        std::vector<Derivation> kid_ds;
        std::vector<ExprPtr> kid_sums;
        for (const ExprPtr& k : e->kids) {
            SumOfTerms st = sum_of_terms(k, pb);
            kid_ds.push_back(st.eq.le);
            kid_sums.push_back(st.sum);
        }
        Derivation head = d_sym_mono(e->sym, std::move(kid_ds));
        std::function<Derivation(std::vector<ExprPtr>)> dist =
            [&](std::vector<ExprPtr> args) -> Derivation {
            for (int i = 0; i < n; ++i) {
                if (args[i]->kind == ExprKind::Zero) {
                    std::vector<ExprPtr> theta;
                    for (int j = 0; j < n; ++j)
                        if (j != i)
                            theta.push_back(args[j]);
                    Derivation ann = d_axiom(
                        pb.axioms(),
                        "annih-" + sym_tag(th, e->sym) + "-" + std::to_string(i),
                        std::move(theta));
                    return d_trans(std::move(ann), pb.le_zero(target));
                }
                if (args[i]->kind == ExprKind::Plus) {
                    std::vector<ExprPtr> theta;
                    for (int j = 0; j < n; ++j)
                        if (j != i)
                            theta.push_back(args[j]);
                    theta.push_back(args[i]->kids[0]);
                    theta.push_back(args[i]->kids[1]);
                    Derivation d = d_axiom(
                        pb.axioms(),
                        "dist-" + sym_tag(th, e->sym) + "-" + std::to_string(i),
                        std::move(theta));
                    std::vector<ExprPtr> la = args, lb = args;
                    la[i] = args[i]->kids[0];
                    lb[i] = args[i]->kids[1];
                    Derivation rest =
                        d_trans(d_plus_mono(dist(la), dist(lb)), pb.le_idem(target));
                    return d_trans(std::move(d), std::move(rest));
                }
            }
            ExprPtr prod = mk_sym(e->sym, args);
            ExprPtr canon;
            EqDer c = pb.eq_canonical(prod, &canon);
            return d_trans(c.le, pb.le_into_sum(canon, target));
        };
        return d_trans(std::move(head), dist(kid_sums));
    }
    default:
        throw FragmentError("sum-of-terms needs a fixpoint-free expression");
    }
}

} // namespace

SumOfTerms sum_of_terms(const ExprPtr& e, const ProofBuilder& pb) {
    const TheoryConfig& th = pb.theory();
    if (!fragment_member(e, Fragment::FixpointFree, th))
        throw FragmentError("sum-of-terms needs a fixpoint-free expression");
    SizeProfile p = size_profile(e, 40, th);
    if (p.beyond)
        throw ResourceError("fixpoint-free expression with atoms larger than 40 leaves");
    int bound = std::max(p.max_bounded(), 0);
    SumOfTerms out;
    for (const Atom& a : lang_bounded(e, bound, th).atoms)
        out.atoms.push_back(a);
    std::vector<ExprPtr> reps;
    for (const Atom& a : out.atoms)
        reps.push_back(atom_to_expr(a, th));
    out.sum = mk_sum(reps);
    Derivation le = expand_to_sum(e, out.sum, pb);
    Derivation ge = pb.le_sum(out.sum, e, [&](const ExprPtr& addend) {
        Atom a = normalize(expr_to_term(addend, th), th);
        return prove_membership(a, e, pb);
    });
    out.eq = {std::move(le), std::move(ge)};
    return out;
}

// ---------------------------------------------------------------------------
// Fixpoint-free inclusion prover
// ---------------------------------------------------------------------------

InclusionProof prove_inclusion_fixpointfree(const ExprPtr& e, const ExprPtr& f,
                                            const HypothesisSet& h,
                                            const ProofBuilder& pb, int bound) {
    const TheoryConfig& th = pb.theory();
    if (!fragment_member(e, Fragment::FixpointFree, th))
        throw FragmentError("left-hand side must be fixpoint-free");
    for (const Hypothesis& hyp : h)
        if (!fragment_member(hyp.rhs, Fragment::FixpointFree, th))
            throw FragmentError("hypothesis right-hand sides must be fixpoint-free");

    InclusionProof out;
    out.exhausted_bound = bound;

    std::map<Atom, Derivation> provable;
    for (const Atom& a : lang_bounded(f, bound, th).atoms)
        provable.emplace(a, prove_membership(a, f, pb));

    struct HypInfo {
        AtomSet rhs_lang;
        bool usable = true;
    };
    std::vector<HypInfo> infos;
    for (const Hypothesis& hyp : h) {
        HypInfo info;
        SizeProfile p = size_profile(hyp.rhs, bound, th);
        if (p.beyond)
            info.usable = false;
        else
            info.rhs_lang = lang_bounded(hyp.rhs, bound, th).atoms;
        infos.push_back(std::move(info));
    }

    auto lookup_glued = [&](const ExprPtr& addend) {
        Atom b = normalize(expr_to_term(addend, th), th);
        auto it = provable.find(b);
        if (it == provable.end())
            throw StructureError("saturation invariant broken");
        Derivation d = it->second;
        if (!alpha_eq(d.concl.lhs, addend)) {
            EqDer glue = pb.eq_terms(expr_to_term(addend, th),
                                     expr_to_term(d.concl.lhs, th));
            d = d_trans(glue.le, std::move(d));
        }
        return d;
    };

    bool grew = true;
    while (grew) {
        grew = false;
        for (size_t i = 0; i < h.size(); ++i) {
            if (!infos[i].usable)
                continue;
            const AtomSet& rhs = infos[i].rhs_lang;
            std::vector<Context> candidates;
            std::set<Atom> seen;
            if (rhs.empty()) {
                for (const Context& c : enumerate_contexts(th, bound))
                    candidates.push_back(c);
            } else {
                const Atom& b0 = *rhs.begin();
                for (const auto& [u, d] : provable)
                    for (const Context& c : occurrences(u, b0, th))
                        if (seen.insert(c).second)
                            candidates.push_back(c);
            }
            for (const Context& c : candidates) {
                bool cond = true;
                for (const Atom& b : rhs)
                    if (!provable.count(apply_context(c, b, th))) {
                        cond = false;
                        break;
                    }
                if (!cond)
                    continue;
                ExprPtr c_lhs = context_apply_expr(c, h[i].lhs, th);
                AtomSet gained = lang_bounded(c_lhs, bound, th).atoms;
                bool any_new = false;
                for (const Atom& a : gained)
                    if (!provable.count(a)) {
                        any_new = true;
                        break;
                    }
                if (!any_new)
                    continue;
                ExprPtr c_rhs = context_apply_expr(c, h[i].rhs, th);
                SumOfTerms st = sum_of_terms(c_rhs, pb);
                Derivation crhs_le_f =
                    d_trans(st.eq.le, pb.le_sum(st.sum, f, lookup_glued));
                Derivation hyp_step = pb.under_context(c, d_hyp(h, static_cast<int>(i)));
                for (const Atom& a : gained) {
                    if (provable.count(a))
                        continue;
                    Derivation da = prove_membership(a, c_lhs, pb);
                    Derivation full = d_trans({std::move(da), hyp_step, crhs_le_f});
                    provable.emplace(a, std::move(full));
                    grew = true;
                }
            }
        }
    }

    SizeProfile pe = size_profile(e, bound, th);
    if (pe.beyond)
        return out;  // atoms of e exceed the search bound
    for (const Atom& a : lang_bounded(e, bound, th).atoms)
        if (!provable.count(a))
            return out;

    SumOfTerms st = sum_of_terms(e, pb);
    Derivation d = d_trans(st.eq.le, pb.le_sum(st.sum, f, lookup_glued));
    out.found = true;
    out.derivation = std::move(d);
    return out;
}

// ---------------------------------------------------------------------------
// Counter-model
// ---------------------------------------------------------------------------

bool CountermodelElement::operator<=(const CountermodelElement& o) const {
    auto rank = [](const CountermodelElement& x) {
        switch (x.kind) {
        case Kind::Zero: return std::pair<int, int>{0, 0};
        case Kind::Pow: return std::pair<int, int>{1, x.pow};
        case Kind::Star: return std::pair<int, int>{2, 0};
        case Kind::Top: return std::pair<int, int>{3, 0};
        }
        return std::pair<int, int>{4, 0};
    };
    return rank(*this) <= rank(o);
}

std::string CountermodelElement::str() const {
    switch (kind) {
    case Kind::Zero: return "0";
    case Kind::Pow: return pow == 0 ? "1" : (pow == 1 ? "a" : "a^" + std::to_string(pow));
    case Kind::Star: return "a*";
    case Kind::Top: return "T";
    }
    return "?";
}

namespace {

using CmE = CountermodelElement;

CmE cm_plus(CmE a, CmE b) { return a <= b ? b : a; }

CmE cm_mul(CmE a, CmE b) {
    using K = CmE::Kind;
    if (a.kind == K::Zero || b.kind == K::Zero)
        return CmE::zero();
    if (a.kind == K::Pow && a.pow == 0)
        return b;
    if (b.kind == K::Pow && b.pow == 0)
        return a;
    if (a.kind == K::Pow && b.kind == K::Pow)
        return CmE::power(a.pow + b.pow);
    if (a.kind == K::Pow && b.kind == K::Star)
        return CmE::star();
    // remaining cases are all top; note star . a^i = top for i > 0
    return CmE::top();
}

CmE cm_eval(const ExprPtr& e, const TheoryConfig& th,
            std::map<std::string, CmE>& env) {
    switch (e->kind) {
    case ExprKind::Zero:
        return CmE::zero();
    case ExprKind::Var:
        if (e->var != 0)
            throw UsageError("counter-model evaluation needs a single variable");
        return CmE::power(1);
    case ExprKind::RecVar: {
        auto it = env.find(e->rec);
        if (it == env.end())
            throw StructureError("unbound recursion variable");
        return it->second;
    }
    case ExprKind::Plus:
        return cm_plus(cm_eval(e->kids[0], th, env), cm_eval(e->kids[1], th, env));
    case ExprKind::Sym:
        if (e->sym == th.unit)
            return CmE::power(0);
        if (e->sym == th.dot)
            return cm_mul(cm_eval(e->kids[0], th, env), cm_eval(e->kids[1], th, env));
        throw UsageError("the counter-model is a monoid model");
    case ExprKind::Mu: {
        // Iterate from the bottom; iterates cofinal in the powers have the
        // omega limit a*, from which iteration continues.
        CmE cur = CmE::zero();
        int climbs = 0;
        while (true) {
            auto saved = env.find(e->rec);
            std::optional<CmE> old;
            if (saved != env.end())
                old = saved->second;
            env[e->rec] = cur;
            CmE next = cm_eval(e->kids[0], th, env);
            if (old)
                env[e->rec] = *old;
            else
                env.erase(e->rec);
            next = cm_plus(next, cur);
            if (next == cur)
                return cur;
            if (next.kind == CmE::Kind::Pow && cur.kind == CmE::Kind::Pow &&
                next.pow > cur.pow && ++climbs > 4) {
                cur = CmE::star();
                climbs = 0;
                continue;
            }
            cur = next;
        }
    }
    case ExprKind::Meta:
        throw UsageError("metavariable reached evaluation");
    }
    throw StructureError("bad expression kind");
}

} // namespace

CountermodelElement countermodel_eval(const ExprPtr& e, const TheoryConfig& th) {
    if (th.kind != TheoryKind::Monoid)
        throw UsageError("the counter-model lives over the monoid theory");
    std::map<std::string, CmE> env;
    return cm_eval(e, th, env);
}

CountermodelReport countermodel_check(const TheoryConfig& th) {
    CountermodelReport rep;
    if (th.kind != TheoryKind::Monoid || th.var_count() < 1)
        throw UsageError("the counter-model lives over a single-variable monoid");

    ExprPtr a = mk_var(0);
    ExprPtr one = mk_one(th);
    std::vector<ExprPtr> gens = {
        mk_zero(),
        one,
        a,
        mk_dot(th, a, a),
        mk_dot(th, a, mk_dot(th, a, a)),
        star(a, th),
        mk_dot(th, star(a, th), star(a, th))  // evaluates to T
    };
    auto ev = [&](const ExprPtr& e) { return countermodel_eval(e, th); };

    bool ok = true;
    int checked = 0;
    std::string detail;
    auto expect_le = [&](const ExprPtr& l, const ExprPtr& r, const std::string& what) {
        ++checked;
        if (!(ev(l) <= ev(r))) {
            ok = false;
            detail += "failed: " + what + "\n";
        }
    };

    for (const ExprPtr& x : gens) {
        expect_le(mk_zero(), x, "0 <= x");
        expect_le(mk_plus(x, x), x, "x+x <= x");
        expect_le(mk_dot(th, x, mk_zero()), mk_zero(), "x.0 <= 0");
        expect_le(mk_dot(th, mk_zero(), x), mk_zero(), "0.x <= 0");
        expect_le(mk_dot(th, one, x), x, "1.x <= x");
        expect_le(x, mk_dot(th, one, x), "x <= 1.x");
        expect_le(mk_dot(th, x, one), x, "x.1 <= x");
        expect_le(x, mk_dot(th, x, one), "x <= x.1");
        for (const ExprPtr& y : gens) {
            expect_le(x, mk_plus(x, y), "x <= x+y");
            expect_le(y, mk_plus(x, y), "y <= x+y");
            for (const ExprPtr& z : gens) {
                ExprPtr l = mk_dot(th, x, mk_plus(y, z));
                ExprPtr r = mk_plus(mk_dot(th, x, y), mk_dot(th, x, z));
                ++checked;
                if (!(ev(l) <= ev(r) && ev(r) <= ev(l))) {
                    ok = false;
                    detail += "failed: distribution\n";
                }
                ExprPtr l2 = mk_dot(th, mk_plus(y, z), x);
                ExprPtr r2 = mk_plus(mk_dot(th, y, x), mk_dot(th, z, x));
                ++checked;
                if (!(ev(l2) <= ev(r2) && ev(r2) <= ev(l2))) {
                    ok = false;
                    detail += "failed: distribution (left)\n";
                }
                ExprPtr al = mk_dot(th, mk_dot(th, x, y), z);
                ExprPtr ar = mk_dot(th, x, mk_dot(th, y, z));
                ++checked;
                if (!(ev(al) == ev(ar))) {
                    ok = false;
                    detail += "failed: associativity\n";
                }
            }
        }
    }

    // fixpoint axioms on stars of generators: unfolding + least prefixpoint
    for (const ExprPtr& g : gens) {
        ExprPtr st = star(g, th);
        expect_le(unfold(st), st, "unfolding");
        for (const ExprPtr& f : gens) {
            CmE body = ev(mk_plus(one, mk_dot(th, g, f)));
            if (body <= ev(f)) {
                ++checked;
                if (!(ev(st) <= ev(f))) {
                    ok = false;
                    detail += "failed: least prefixpoint at " +
                              expr_to_string(g, th) + " / " + expr_to_string(f, th) +
                              "\n";
                }
            }
        }
    }

    rep.axioms_hold = ok;
    rep.checked_instances = checked;

    CmE lhs = ev(mk_dot(th, star(a, th), a));
    CmE rhs = ev(star(a, th));
    rep.refutation_found = lhs == CmE::top() && !(lhs <= rhs);
    rep.detail = detail + "a*.a = " + lhs.str() + ", a* = " + rhs.str();
    return rep;
}

// ---------------------------------------------------------------------------
// Serialisation
// ---------------------------------------------------------------------------

namespace {

const char* rule_name(Rule r) {
    switch (r) {
    case Rule::Axiom: return "axiom";
    case Rule::Hyp: return "hyp";
    case Rule::Refl: return "refl";
    case Rule::Trans: return "trans";
    case Rule::PlusMono: return "plus-mono";
    case Rule::SymMono: return "sym-mono";
    }
    return "?";
}

nlohmann::json to_json_rec(const Derivation& d, const TheoryConfig& th) {
    nlohmann::json j;
    j["rule"] = rule_name(d.rule);
    j["lhs"] = expr_to_string(d.concl.lhs, th);
    j["rhs"] = expr_to_string(d.concl.rhs, th);
    if (d.rule == Rule::Axiom) {
        j["axiom"] = d.axiom;
        if (d.mu)
            j["mu"] = expr_to_string(d.mu, th);
        if (!d.theta.empty()) {
            nlohmann::json t = nlohmann::json::array();
            for (const ExprPtr& e : d.theta)
                t.push_back(expr_to_string(e, th));
            j["theta"] = std::move(t);
        }
    }
    if (d.rule == Rule::Hyp)
        j["hyp"] = d.hyp_index;
    if (d.rule == Rule::SymMono)
        j["sym"] = th.sig.name(d.sym);
    if (!d.kids.empty()) {
        nlohmann::json kids = nlohmann::json::array();
        for (const Derivation& k : d.kids)
            kids.push_back(to_json_rec(k, th));
        j["kids"] = std::move(kids);
    }
    return j;
}

Derivation from_json_rec(const nlohmann::json& j, const TheoryConfig& th) {
    Derivation d;
    std::string rule = j.at("rule").get<std::string>();
    if (rule == "axiom")
        d.rule = Rule::Axiom;
    else if (rule == "hyp")
        d.rule = Rule::Hyp;
    else if (rule == "refl")
        d.rule = Rule::Refl;
    else if (rule == "trans")
        d.rule = Rule::Trans;
    else if (rule == "plus-mono")
        d.rule = Rule::PlusMono;
    else if (rule == "sym-mono")
        d.rule = Rule::SymMono;
    else
        throw UsageError("unknown rule '" + rule + "'");
    d.concl.lhs = parse_expr(j.at("lhs").get<std::string>(), th);
    d.concl.rhs = parse_expr(j.at("rhs").get<std::string>(), th);
    if (j.contains("axiom"))
        d.axiom = j["axiom"].get<std::string>();
    if (j.contains("mu"))
        d.mu = parse_expr(j["mu"].get<std::string>(), th);
    if (j.contains("theta"))
        for (const auto& t : j["theta"])
            d.theta.push_back(parse_expr(t.get<std::string>(), th));
    if (j.contains("hyp"))
        d.hyp_index = j["hyp"].get<int>();
    if (j.contains("sym")) {
        d.sym = th.sig.find(j["sym"].get<std::string>());
        if (d.sym < 0)
            throw UsageError("unknown symbol in derivation");
    }
    if (j.contains("kids"))
        for (const auto& k : j["kids"])
            d.kids.push_back(from_json_rec(k, th));
    return d;
}

} // namespace

std::string derivation_to_json(const Derivation& d, const TheoryConfig& th) {
    return to_json_rec(d, th).dump(1);
}

Derivation derivation_from_json(const std::string& text, const TheoryConfig& th) {
    nlohmann::json j = nlohmann::json::parse(text);
    return from_json_rec(j, th);
}

std::string ineq_to_string(const Ineq& i, const TheoryConfig& th) {
    return expr_to_string(i.lhs, th) + " <= " + expr_to_string(i.rhs, th);
}

} // namespace kah
