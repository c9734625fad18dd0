#ifndef KAH_GEN_HPP
#define KAH_GEN_HPP

#include "kah/expr.hpp"

#include <random>

namespace kah {

/// Seeded generator for closed random expressions inside a fragment.
/// Deterministic given the rng state; used by property suites and the
/// reduction test corpora.
class ExprGen {
public:
    ExprGen(const TheoryConfig& th, Fragment frag, std::mt19937_64& rng)
        : th_(th), frag_(frag), rng_(rng) {}

    ExprPtr operator()(int budget) { return gen(budget); }

private:
    const TheoryConfig& th_;
    Fragment frag_;
    std::mt19937_64& rng_;
    std::vector<std::string> scope_;
    int mu_counter_ = 0;

    int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }

    ExprPtr leaf() {
        std::vector<ExprPtr> choices;
        for (VarId v = 0; v < th_.var_count(); ++v)
            choices.push_back(mk_var(v));
        for (SymId s = 0; s < th_.sig.size(); ++s)
            if (th_.sig.arity(s) == 0 && s != th_.unit)
                choices.push_back(mk_sym(s, {}));
        if (th_.has_unit())
            choices.push_back(mk_one(th_));
        if (frag_ == Fragment::Full && !scope_.empty() && pick(3) == 0)
            return mk_rec(scope_[pick(static_cast<int>(scope_.size()))]);
        if (choices.empty())
            return mk_zero();
        if (pick(12) == 0)
            return mk_zero();
        return choices[pick(static_cast<int>(choices.size()))];
    }

    ExprPtr gen(int budget) {
        if (budget <= 1)
            return leaf();
        enum { Leaf, Plus, Op, Star, ParStar, Mu };
        std::vector<int> menu = {Leaf, Plus, Plus, Op, Op, Op};
        bool star_ok = th_.dot >= 0 && th_.has_unit() &&
                       (frag_ == Fragment::Full || frag_ == Fragment::KleeneStar ||
                        frag_ == Fragment::BiKleene);
        bool parstar_ok = th_.par >= 0 && th_.has_unit() &&
                          (frag_ == Fragment::Full || frag_ == Fragment::BiKleene);
        if (star_ok)
            menu.push_back(Star);
        if (parstar_ok)
            menu.push_back(ParStar);
        if (frag_ == Fragment::Full && budget >= 3)
            menu.push_back(Mu);
        switch (menu[pick(static_cast<int>(menu.size()))]) {
        case Plus: {
            int l = 1 + pick(budget - 1);
            return mk_plus(gen(l), gen(budget - l));
        }
        case Op: {
            std::vector<SymId> ops;
            for (SymId s = 0; s < th_.sig.size(); ++s)
                if (th_.sig.arity(s) > 0)
                    ops.push_back(s);
            if (ops.empty())
                return leaf();
            SymId s = ops[pick(static_cast<int>(ops.size()))];
            int k = th_.sig.arity(s);
            std::vector<ExprPtr> kids;
            int left = budget - 1;
            for (int i = 0; i < k; ++i) {
                int share = i + 1 == k ? left : 1 + pick(std::max(1, left - (k - i - 1)));
                kids.push_back(gen(share));
                left -= share;
                if (left < 1)
                    left = 1;
            }
            return mk_sym(s, std::move(kids));
        }
        case Star:
            return star(gen(budget - 2), th_);
        case ParStar:
            return parstar(gen(budget - 2), th_);
        case Mu: {
            std::string x = "r" + std::to_string(mu_counter_++);
            scope_.push_back(x);
            ExprPtr body = gen(budget - 1);
            scope_.pop_back();
            // keep the fixpoint productive-ish: bias towards a guarded sum
            return mk_mu(x, body);
        }
        default:
            return leaf();
        }
    }
};

inline ExprPtr random_expr(const TheoryConfig& th, Fragment frag,
                           std::mt19937_64& rng, int budget) {
    ExprGen g(th, frag, rng);
    return g(budget);
}

} // namespace kah

#endif
