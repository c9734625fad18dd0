#include "kah/semantics.hpp"

#include <algorithm>
#include <functional>
#include <map>

namespace kah {

// ---------------------------------------------------------------------------
// Size profiles
// ---------------------------------------------------------------------------

int SizeProfile::min_size() const {
    for (int k = 0; k < 64; ++k)
        if ((mask >> k) & 1)
            return k;
    return beyond ? 64 : -1;
}

int SizeProfile::max_bounded() const {
    for (int k = 63; k >= 0; --k)
        if ((mask >> k) & 1)
            return k;
    return -1;
}

namespace {

SizeProfile profile_combine(SymId s, const std::vector<SizeProfile>& kids, int bound,
                            const TheoryConfig& th, SizeMetric metric) {
    SizeProfile out;
    bool additive = metric == SizeMetric::Leaves;
    // constants
    if (kids.empty()) {
        if (th.kind == TheoryKind::Free || th.kind == TheoryKind::Custom)
            out.mask = 1u << 1;
        else if (s == th.unit)
            out.mask = 1;  // size 0
        else
            out.mask = 1u << 1;
        return out;
    }
    // any empty child language empties the application
    for (const SizeProfile& k : kids)
        if (k.empty())
            return out;
    // fold children pairwise
    SizeProfile acc = kids[0];
    for (size_t i = 1; i < kids.size(); ++i) {
        SizeProfile next;
        next.beyond = false;
        const SizeProfile& b = kids[i];
        if (additive) {
            for (int x = 0; x <= bound && x < 64; ++x) {
                if (!acc.has(x))
                    continue;
                for (int y = 0; y <= bound && y < 64; ++y) {
                    if (!b.has(y))
                        continue;
                    int z = x + y;
                    if (z <= bound && z < 64)
                        next.mask |= uint64_t(1) << z;
                    else
                        next.beyond = true;
                }
            }
            // pairing anything with a beyond-side lands beyond
            if (acc.beyond && !b.empty())
                next.beyond = true;
            if (b.beyond && !acc.empty())
                next.beyond = true;
        } else {
            // depth: folding keeps max of children (final +1 applied below)
            for (int x = 0; x <= bound && x < 64; ++x)
                if (acc.has(x))
                    for (int y = 0; y <= bound && y < 64; ++y)
                        if (b.has(y))
                            next.mask |= uint64_t(1) << std::max(x, y);
            if ((acc.beyond && !b.empty()) || (b.beyond && !acc.empty()))
                next.beyond = true;
        }
        acc = next;
    }
    if (!additive) {
        // apply the +1 level for the symbol node
        SizeProfile shifted;
        shifted.beyond = acc.beyond;
        for (int x = 0; x <= bound && x < 64; ++x)
            if (acc.has(x)) {
                int z = x + 1;
                if (z <= bound && z < 64)
                    shifted.mask |= uint64_t(1) << z;
                else
                    shifted.beyond = true;
            }
        return shifted;
    }
    return acc;
}

SizeProfile profile_rec(const ExprPtr& e, int bound, const TheoryConfig& th,
                        SizeMetric metric,
                        std::map<std::string, SizeProfile>& env) {
    switch (e->kind) {
    case ExprKind::Zero:
        return {};
    case ExprKind::Var: {
        SizeProfile p;
        p.mask = uint64_t(1) << 1;
        return p;
    }
    case ExprKind::RecVar: {
        auto it = env.find(e->rec);
        if (it == env.end())
            throw StructureError("unbound recursion variable '" + e->rec + "'");
        return it->second;
    }
    case ExprKind::Plus: {
        SizeProfile a = profile_rec(e->kids[0], bound, th, metric, env);
        SizeProfile b = profile_rec(e->kids[1], bound, th, metric, env);
        a.mask |= b.mask;
        a.beyond |= b.beyond;
        return a;
    }
    case ExprKind::Sym: {
        std::vector<SizeProfile> kids;
        for (const ExprPtr& k : e->kids)
            kids.push_back(profile_rec(k, bound, th, metric, env));
        return profile_combine(e->sym, kids, bound, th, metric);
    }
    case ExprKind::Mu: {
        SizeProfile cur;
        while (true) {
            auto saved = env.find(e->rec);
            SizeProfile old;
            bool had = saved != env.end();
            if (had)
                old = saved->second;
            env[e->rec] = cur;
            SizeProfile next = profile_rec(e->kids[0], bound, th, metric, env);
            if (had)
                env[e->rec] = old;
            else
                env.erase(e->rec);
            next.mask |= cur.mask;
            next.beyond |= cur.beyond;
            if (next.mask == cur.mask && next.beyond == cur.beyond)
                return cur;
            cur = next;
        }
    }
    case ExprKind::Meta:
        throw UsageError("metavariable reached the semantics");
    }
    throw StructureError("bad expression kind");
}

} // namespace

SizeProfile size_profile(const ExprPtr& e, int bound, const TheoryConfig& th,
                         SizeMetric metric) {
    if (bound >= 63)
        throw UsageError("size bounds above 62 are not supported");
    std::map<std::string, SizeProfile> env;
    return profile_rec(e, bound, th, metric, env);
}

// ---------------------------------------------------------------------------
// Bounded language evaluation
// ---------------------------------------------------------------------------

namespace {

void apply_symbol_sets(SymId s, const std::vector<const AtomSet*>& args, int bound,
                       const TheoryConfig& th, SizeMetric metric, AtomSet& out) {
    size_t n = args.size();
    if (n == 0) {
        Atom a = apply_symbol(s, {}, th);
        if (atom_size(a, metric) <= bound)
            out.insert(a);
        return;
    }
    std::vector<Atom> tuple(n);
    std::function<void(size_t, int)> pick = [&](size_t i, int budget) {
        if (i == n) {
            Atom a = apply_symbol(s, tuple, th);
            if (atom_size(a, metric) <= bound)
                out.insert(a);
            return;
        }
        for (const Atom& cand : *args[i]) {
            int sz = atom_size(cand, metric);
            if (metric == SizeMetric::Leaves && sz > budget)
                continue;  // the set is ordered structurally, not by size
            tuple[i] = cand;
            pick(i + 1, metric == SizeMetric::Leaves ? budget - sz : budget);
        }
    };
    pick(0, bound);
}

AtomSet eval_rec(const ExprPtr& e, int bound, const TheoryConfig& th, SizeMetric metric,
                 std::map<std::string, AtomSet>& env) {
    switch (e->kind) {
    case ExprKind::Zero:
        return {};
    case ExprKind::Var: {
        Atom a = Atom::leaf(e->var);
        if (atom_size(a, metric) <= bound)
            return {a};
        return {};
    }
    case ExprKind::RecVar: {
        auto it = env.find(e->rec);
        if (it == env.end())
            throw StructureError("unbound recursion variable '" + e->rec + "'");
        return it->second;
    }
    case ExprKind::Plus: {
        AtomSet a = eval_rec(e->kids[0], bound, th, metric, env);
        AtomSet b = eval_rec(e->kids[1], bound, th, metric, env);
        a.insert(b.begin(), b.end());
        return a;
    }
    case ExprKind::Sym: {
        std::vector<AtomSet> kids;
        kids.reserve(e->kids.size());
        for (const ExprPtr& k : e->kids)
            kids.push_back(eval_rec(k, bound, th, metric, env));
        std::vector<const AtomSet*> ptrs;
        for (const AtomSet& k : kids)
            ptrs.push_back(&k);
        AtomSet out;
        apply_symbol_sets(e->sym, ptrs, bound, th, metric, out);
        return out;
    }
    case ExprKind::Mu: {
        // Kleene iteration; the universe is finite and the map monotone.
        AtomSet cur;
        while (true) {
            auto saved = env.find(e->rec);
            AtomSet old;
            bool had = saved != env.end();
            if (had)
                old = std::move(saved->second);
            env[e->rec] = cur;
            AtomSet next = eval_rec(e->kids[0], bound, th, metric, env);
            if (had)
                env[e->rec] = std::move(old);
            else
                env.erase(e->rec);
            next.insert(cur.begin(), cur.end());
            if (next == cur)
                return cur;
            cur = std::move(next);
        }
    }
    case ExprKind::Meta:
        throw UsageError("metavariable reached the semantics");
    }
    throw StructureError("bad expression kind");
}

} // namespace

BoundedLanguage lang_bounded(const ExprPtr& e, int bound, const TheoryConfig& th,
                             SizeMetric metric) {
    if (bound < 0)
        throw UsageError("size bound must be nonnegative");
    if (!is_closed(e))
        throw UsageError("expression must be closed");
    std::map<std::string, AtomSet> env;
    BoundedLanguage out;
    out.atoms = eval_rec(e, bound, th, metric, env);
    out.size_bound = bound;
    out.exact_below_bound = true;
    return out;
}

AtomSet apply_context_lang(const Context& c, const AtomSet& l, const TheoryConfig& th) {
    AtomSet out;
    for (const Atom& a : l)
        out.insert(apply_context(c, a, th));
    return out;
}

// ---------------------------------------------------------------------------
// Closure engine
// ---------------------------------------------------------------------------

ClosureEngine::ClosureEngine(const TheoryConfig& th, HypothesisSet hyps,
                             int work_bound, SizeMetric metric)
    : th_(th), hyps_(std::move(hyps)), work_bound_(work_bound), metric_(metric) {
    if (work_bound < 0)
        throw UsageError("work bound must be nonnegative");
    for (const Hypothesis& h : hyps_) {
        if (!is_closed(h.lhs) || !is_closed(h.rhs))
            throw UsageError("hypotheses must be closed expressions");
        HypCache c;
        c.lhs = lang_bounded(h.lhs, work_bound_, th_, metric_).atoms;
        c.rhs = lang_bounded(h.rhs, work_bound_, th_, metric_).atoms;
        SizeProfile pl = size_profile(h.lhs, work_bound_, th_, metric_);
        SizeProfile pr = size_profile(h.rhs, work_bound_, th_, metric_);
        c.lhs_beyond = pl.beyond;
        c.rhs_beyond = pr.beyond;
        cache_.push_back(std::move(c));
    }
}

const std::vector<Context>& ClosureEngine::contexts() const {
    if (!contexts_)
        contexts_ = enumerate_contexts(th_, work_bound_, metric_);
    return *contexts_;
}

AtomSet ClosureEngine::closure_step(const AtomSet& l) const {
    AtomSet add;
    for (size_t i = 0; i < hyps_.size(); ++i) {
        const HypCache& c = cache_[i];
        if (c.rhs_beyond) {
            // The side condition needs the full rhs language; skip and flag.
            approximate_ = true;
            continue;
        }
        if (c.rhs.empty()) {
            // Condition holds vacuously for every context.
            if (!c.vacuous_yield) {
                AtomSet yield;
                for (const Context& ctx : contexts())
                    for (const Atom& a : c.lhs) {
                        Atom t = apply_context(ctx, a, th_);
                        if (atom_size(t, metric_) <= work_bound_)
                            yield.insert(t);
                    }
                c.vacuous_yield = std::move(yield);
            }
            add.insert(c.vacuous_yield->begin(), c.vacuous_yield->end());
            continue;
        }
        const Atom& b0 = *c.rhs.begin();
        std::set<Atom> tried;
        for (const Atom& u : l) {
            for (const Context& ctx : occurrences(u, b0, th_)) {
                if (!tried.insert(ctx).second)
                    continue;
                bool all_in = true;
                for (const Atom& b : c.rhs) {
                    Atom t = apply_context(ctx, b, th_);
                    if (atom_size(t, metric_) > work_bound_ || !l.count(t)) {
                        all_in = false;
                        break;
                    }
                }
                if (!all_in)
                    continue;
                for (const Atom& a : c.lhs) {
                    Atom t = apply_context(ctx, a, th_);
                    if (atom_size(t, metric_) <= work_bound_)
                        add.insert(t);
                }
            }
        }
    }
    return add;
}

AtomSet ClosureEngine::closure(const AtomSet& l) const {
    for (const Atom& a : l)
        if (atom_size(a, metric_) > work_bound_)
            throw UsageError("input language exceeds the work bound");
    AtomSet cur = l;
    while (true) {
        AtomSet add = closure_step(cur);
        size_t before = cur.size();
        cur.insert(add.begin(), add.end());
        if (cur.size() == before)
            return cur;
    }
}

BoundedLanguage closed_lang_bounded(const ExprPtr& e, const HypothesisSet& h,
                                    int report_bound, int work_bound,
                                    const TheoryConfig& th, SizeMetric metric) {
    if (work_bound < report_bound)
        throw UsageError("work bound must be at least the report bound");
    ClosureEngine engine(th, h, work_bound, metric);
    AtomSet closed = engine.closure(lang_bounded(e, work_bound, th, metric).atoms);
    BoundedLanguage out;
    out.size_bound = report_bound;
    out.exact_below_bound = !engine.approximate();
    for (const Atom& a : closed)
        if (atom_size(a, metric) <= report_bound)
            out.atoms.insert(a);
    return out;
}

InclusionResult inclusion_check(const ExprPtr& e, const ExprPtr& f,
                                const HypothesisSet& h, int report_bound,
                                int work_bound, const TheoryConfig& th,
                                SizeMetric metric) {
    if (work_bound < report_bound)
        throw UsageError("work bound must be at least the report bound");
    ClosureEngine engine(th, h, work_bound, metric);
    AtomSet ce = engine.closure(lang_bounded(e, work_bound, th, metric).atoms);
    AtomSet cf = engine.closure(lang_bounded(f, work_bound, th, metric).atoms);
    InclusionResult out;
    out.report_bound = report_bound;
    out.work_bound = work_bound;
    out.approximate = engine.approximate();
    std::optional<Atom> witness;
    for (const Atom& a : ce)
        if (!cf.count(a)) {
            if (!witness ||
                atom_size(a, metric) < atom_size(*witness, metric))
                witness = a;
        }
    if (witness) {
        out.holds = false;
        out.counterexample = witness;
    } else {
        out.holds = true;
    }
    return out;
}

int default_work_bound(int report_bound, const HypothesisSet& h) {
    // report + the largest hypothesis lhs leaf count (sums take the max
    // branch, stars their body), so one closure step fits in the margin
    std::function<int(const ExprPtr&)> leaves = [&](const ExprPtr& u) -> int {
        switch (u->kind) {
        case ExprKind::Var:
            return 1;
        case ExprKind::Sym: {
            if (u->kids.empty())
                return 1;
            int n = 0;
            for (const ExprPtr& k : u->kids)
                n += leaves(k);
            return n;
        }
        case ExprKind::Plus:
            return std::max(leaves(u->kids[0]), leaves(u->kids[1]));
        case ExprKind::Mu:
            return leaves(u->kids[0]);
        default:
            return 0;
        }
    };
    int lhs = 0;
    for (const Hypothesis& hyp : h)
        lhs = std::max(lhs, leaves(hyp.lhs));
    return report_bound + lhs;
}

} // namespace kah
