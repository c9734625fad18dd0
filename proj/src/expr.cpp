#include "kah/expr.hpp"

#include <algorithm>
#include <cctype>
#include <functional>

namespace kah {

// ---------------------------------------------------------------------------
// Constructors
// ---------------------------------------------------------------------------

namespace {
ExprPtr make(Expr e) { return std::make_shared<const Expr>(std::move(e)); }
} // namespace

ExprPtr mk_var(VarId v) {
    Expr e;
    e.kind = ExprKind::Var;
    e.var = v;
    return make(std::move(e));
}

ExprPtr mk_rec(const std::string& name) {
    Expr e;
    e.kind = ExprKind::RecVar;
    e.rec = name;
    return make(std::move(e));
}

ExprPtr mk_zero() {
    Expr e;
    e.kind = ExprKind::Zero;
    return make(std::move(e));
}

ExprPtr mk_plus(ExprPtr a, ExprPtr b) {
    Expr e;
    e.kind = ExprKind::Plus;
    e.kids = {std::move(a), std::move(b)};
    return make(std::move(e));
}

ExprPtr mk_sum(const std::vector<ExprPtr>& parts) {
    if (parts.empty())
        return mk_zero();
    ExprPtr out = parts.back();
    for (size_t i = parts.size() - 1; i-- > 0;)
        out = mk_plus(parts[i], out);
    return out;
}

ExprPtr mk_sym(SymId s, std::vector<ExprPtr> kids) {
    Expr e;
    e.kind = ExprKind::Sym;
    e.sym = s;
    e.kids = std::move(kids);
    return make(std::move(e));
}

ExprPtr mk_mu(const std::string& x, ExprPtr body) {
    Expr e;
    e.kind = ExprKind::Mu;
    e.rec = x;
    e.kids = {std::move(body)};
    return make(std::move(e));
}

ExprPtr mk_meta(int i) {
    Expr e;
    e.kind = ExprKind::Meta;
    e.meta = i;
    return make(std::move(e));
}

ExprPtr mk_one(const TheoryConfig& th) {
    if (!th.has_unit())
        throw TheoryError("theory has no unit symbol");
    return mk_sym(th.unit, {});
}

ExprPtr mk_dot(const TheoryConfig& th, ExprPtr a, ExprPtr b) {
    if (th.dot < 0)
        throw TheoryError("theory has no sequential product");
    return mk_sym(th.dot, {std::move(a), std::move(b)});
}

ExprPtr mk_par(const TheoryConfig& th, ExprPtr a, ExprPtr b) {
    if (th.par < 0)
        throw TheoryError("theory has no parallel product");
    return mk_sym(th.par, {std::move(a), std::move(b)});
}

ExprPtr mk_prod(const TheoryConfig& th, const std::vector<ExprPtr>& parts) {
    if (parts.empty())
        return mk_one(th);
    ExprPtr out = parts.back();
    for (size_t i = parts.size() - 1; i-- > 0;)
        out = mk_dot(th, parts[i], out);
    return out;
}

namespace {
std::string fresh_recvar(const ExprPtr& e) {
    std::set<std::string> used;
    std::function<void(const ExprPtr&)> walk = [&](const ExprPtr& u) {
        if (u->kind == ExprKind::RecVar || u->kind == ExprKind::Mu)
            used.insert(u->rec);
        for (const ExprPtr& k : u->kids)
            walk(k);
    };
    walk(e);
    if (!used.count("x"))
        return "x";
    for (int i = 0;; ++i) {
        std::string name = "x" + std::to_string(i);
        if (!used.count(name))
            return name;
    }
}
} // namespace

ExprPtr star(ExprPtr e, const TheoryConfig& th) {
    if (th.dot < 0 || !th.has_unit())
        throw TheoryError("star needs a monoid-like theory");
    std::string x = fresh_recvar(e);
    return mk_mu(x, mk_plus(mk_one(th), mk_dot(th, e, mk_rec(x))));
}

ExprPtr parstar(ExprPtr e, const TheoryConfig& th) {
    if (th.par < 0 || !th.has_unit())
        throw TheoryError("parallel star needs a parallel product");
    std::string x = fresh_recvar(e);
    return mk_mu(x, mk_plus(mk_one(th), mk_par(th, e, mk_rec(x))));
}

StarShape match_star(const ExprPtr& e, const TheoryConfig& th) {
    StarShape out;
    if (e->kind != ExprKind::Mu || !th.has_unit())
        return out;
    const ExprPtr& body = e->kids[0];
    if (body->kind != ExprKind::Plus)
        return out;
    const ExprPtr& l = body->kids[0];
    const ExprPtr& r = body->kids[1];
    if (l->kind != ExprKind::Sym || l->sym != th.unit || !l->kids.empty())
        return out;
    if (r->kind != ExprKind::Sym || (r->sym != th.dot && r->sym != th.par))
        return out;
    const ExprPtr& it = r->kids[0];
    const ExprPtr& rv = r->kids[1];
    if (rv->kind != ExprKind::RecVar || rv->rec != e->rec)
        return out;
    if (free_recvars(it).count(e->rec))
        return out;
    out.matches = true;
    out.parallel = r->sym == th.par;
    out.body = it;
    return out;
}

ExprPtr term_to_expr(const Term& t) {
    if (t.is_var)
        return mk_var(t.var);
    std::vector<ExprPtr> kids;
    for (const Term& k : t.kids)
        kids.push_back(term_to_expr(k));
    return mk_sym(t.sym, std::move(kids));
}

ExprPtr atom_to_expr(const Atom& a, const TheoryConfig& th) {
    return term_to_expr(embed(a, th));
}

// ---------------------------------------------------------------------------
// Substitution
// ---------------------------------------------------------------------------

Subst Subst::of_var(VarId v, ExprPtr e) {
    Subst s;
    s.xmap[v] = std::move(e);
    return s;
}

Subst Subst::of_rec(const std::string& x, ExprPtr e) {
    Subst s;
    s.rmap[x] = std::move(e);
    return s;
}

ExprPtr substitute(const ExprPtr& e, const Subst& rho) {
    switch (e->kind) {
    case ExprKind::Zero:
    case ExprKind::Meta:
        return e;
    case ExprKind::Var: {
        auto it = rho.xmap.find(e->var);
        return it == rho.xmap.end() ? e : it->second;
    }
    case ExprKind::RecVar: {
        auto it = rho.rmap.find(e->rec);
        return it == rho.rmap.end() ? e : it->second;
    }
    case ExprKind::Plus:
        return mk_plus(substitute(e->kids[0], rho), substitute(e->kids[1], rho));
    case ExprKind::Sym: {
        std::vector<ExprPtr> kids;
        kids.reserve(e->kids.size());
        for (const ExprPtr& k : e->kids)
            kids.push_back(substitute(k, rho));
        return mk_sym(e->sym, std::move(kids));
    }
    case ExprKind::Mu: {
        // (mu x. e) rho = mu x. e (rho \ x): the binder shadows.
        if (!rho.rmap.count(e->rec))
            return mk_mu(e->rec, substitute(e->kids[0], rho));
        Subst inner = rho;
        inner.rmap.erase(e->rec);
        return mk_mu(e->rec, substitute(e->kids[0], inner));
    }
    }
    throw StructureError("bad expression kind");
}

ExprPtr subst_rec(const ExprPtr& e, const std::string& x, const ExprPtr& f) {
    return substitute(e, Subst::of_rec(x, f));
}

ExprPtr instantiate(const ExprPtr& e, const std::vector<ExprPtr>& theta) {
    switch (e->kind) {
    case ExprKind::Meta:
        if (e->meta < 0 || e->meta >= static_cast<int>(theta.size()) ||
            !theta[e->meta])
            throw UsageError("uninstantiated metavariable in axiom");
        return theta[e->meta];
    case ExprKind::Zero:
    case ExprKind::Var:
    case ExprKind::RecVar:
        return e;
    case ExprKind::Plus:
        return mk_plus(instantiate(e->kids[0], theta), instantiate(e->kids[1], theta));
    case ExprKind::Sym: {
        std::vector<ExprPtr> kids;
        for (const ExprPtr& k : e->kids)
            kids.push_back(instantiate(k, theta));
        return mk_sym(e->sym, std::move(kids));
    }
    case ExprKind::Mu:
        return mk_mu(e->rec, instantiate(e->kids[0], theta));
    }
    throw StructureError("bad expression kind");
}

std::set<std::string> free_recvars(const ExprPtr& e) {
    std::set<std::string> out;
    std::function<void(const ExprPtr&, std::set<std::string>&)> walk =
        [&](const ExprPtr& u, std::set<std::string>& bound) {
            switch (u->kind) {
            case ExprKind::RecVar:
                if (!bound.count(u->rec))
                    out.insert(u->rec);
                return;
            case ExprKind::Mu: {
                bool added = bound.insert(u->rec).second;
                walk(u->kids[0], bound);
                if (added)
                    bound.erase(u->rec);
                return;
            }
            default:
                for (const ExprPtr& k : u->kids)
                    walk(k, bound);
            }
        };
    std::set<std::string> bound;
    walk(e, bound);
    return out;
}

bool is_closed(const ExprPtr& e) { return free_recvars(e).empty(); }

bool has_meta(const ExprPtr& e) { return max_meta(e) >= 0; }

int max_meta(const ExprPtr& e) {
    int m = e->kind == ExprKind::Meta ? e->meta : -1;
    for (const ExprPtr& k : e->kids)
        m = std::max(m, max_meta(k));
    return m;
}

int expr_nodes(const ExprPtr& e) {
    int n = 1;
    for (const ExprPtr& k : e->kids)
        n += expr_nodes(k);
    return n;
}

std::set<VarId> expr_vars(const ExprPtr& e) {
    std::set<VarId> out;
    std::function<void(const ExprPtr&)> walk = [&](const ExprPtr& u) {
        if (u->kind == ExprKind::Var)
            out.insert(u->var);
        for (const ExprPtr& k : u->kids)
            walk(k);
    };
    walk(e);
    return out;
}

void collect_mu(const ExprPtr& e, std::vector<ExprPtr>& out) {
    if (e->kind == ExprKind::Mu)
        out.push_back(e);
    for (const ExprPtr& k : e->kids)
        collect_mu(k, out);
}

ExprPtr unfold(const ExprPtr& mu) {
    if (mu->kind != ExprKind::Mu)
        throw UsageError("unfold expects a fixpoint expression");
    return subst_rec(mu->kids[0], mu->rec, mu);
}

// ---------------------------------------------------------------------------
// Alpha-equivalence
// ---------------------------------------------------------------------------

namespace {
int alpha_cmp_rec(const ExprPtr& a, const ExprPtr& b,
                  std::vector<std::pair<std::string, std::string>>& binders) {
    auto rank = [](ExprKind k) {
        switch (k) {
        case ExprKind::Zero: return 0;
        case ExprKind::Var: return 1;
        case ExprKind::RecVar: return 2;
        case ExprKind::Plus: return 3;
        case ExprKind::Sym: return 4;
        case ExprKind::Mu: return 5;
        case ExprKind::Meta: return 6;
        }
        return 7;
    };
    if (rank(a->kind) != rank(b->kind))
        return rank(a->kind) < rank(b->kind) ? -1 : 1;
    switch (a->kind) {
    case ExprKind::Zero:
        return 0;
    case ExprKind::Var:
        return a->var == b->var ? 0 : (a->var < b->var ? -1 : 1);
    case ExprKind::Meta:
        return a->meta == b->meta ? 0 : (a->meta < b->meta ? -1 : 1);
    case ExprKind::RecVar: {
        for (size_t i = binders.size(); i-- > 0;) {
            bool la = binders[i].first == a->rec;
            bool lb = binders[i].second == b->rec;
            if (la != lb)
                return la ? -1 : 1;
            if (la && lb)
                return 0;
        }
        if (a->rec != b->rec)
            return a->rec < b->rec ? -1 : 1;
        return 0;
    }
    case ExprKind::Sym:
        if (a->sym != b->sym)
            return a->sym < b->sym ? -1 : 1;
        [[fallthrough]];
    case ExprKind::Plus: {
        if (a->kids.size() != b->kids.size())
            return a->kids.size() < b->kids.size() ? -1 : 1;
        for (size_t i = 0; i < a->kids.size(); ++i)
            if (int c = alpha_cmp_rec(a->kids[i], b->kids[i], binders); c != 0)
                return c;
        return 0;
    }
    case ExprKind::Mu: {
        binders.emplace_back(a->rec, b->rec);
        int c = alpha_cmp_rec(a->kids[0], b->kids[0], binders);
        binders.pop_back();
        return c;
    }
    }
    return 0;
}
} // namespace

int alpha_cmp(const ExprPtr& a, const ExprPtr& b) {
    std::vector<std::pair<std::string, std::string>> binders;
    return alpha_cmp_rec(a, b, binders);
}

bool alpha_eq(const ExprPtr& a, const ExprPtr& b) { return alpha_cmp(a, b) == 0; }

// ---------------------------------------------------------------------------
// Fragments
// ---------------------------------------------------------------------------

std::string fragment_name(Fragment f) {
    switch (f) {
    case Fragment::Full: return "full";
    case Fragment::FixpointFree: return "fixpoint-free";
    case Fragment::KleeneStar: return "kleene-star";
    case Fragment::BiKleene: return "bi-kleene";
    }
    return "?";
}

bool fragment_member(const ExprPtr& e, Fragment f, const TheoryConfig& th) {
    if (f == Fragment::Full)
        return true;
    std::vector<ExprPtr> mus;
    collect_mu(e, mus);
    if (f == Fragment::FixpointFree)
        return mus.empty();
    for (const ExprPtr& m : mus) {
        StarShape s = match_star(m, th);
        if (!s.matches)
            return false;
        if (f == Fragment::KleeneStar && s.parallel)
            return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

namespace {

// precedence levels: 0 sum, 1 par, 2 dot, 3 postfix, 4 atom
void print_rec(const ExprPtr& e, const TheoryConfig& th, int prec, std::string& out) {
    auto paren = [&](int inner, const std::function<void()>& body) {
        bool need = inner < prec;
        if (need)
            out += "(";
        body();
        if (need)
            out += ")";
    };
    switch (e->kind) {
    case ExprKind::Zero:
        out += "0";
        return;
    case ExprKind::Var:
        out += th.var_name(e->var);
        return;
    case ExprKind::RecVar:
        out += e->rec;
        return;
    case ExprKind::Meta:
        out += "$" + std::to_string(e->meta);
        return;
    case ExprKind::Plus:
        paren(0, [&] {
            print_rec(e->kids[0], th, 1, out);
            out += " + ";
            print_rec(e->kids[1], th, 0, out);
        });
        return;
    case ExprKind::Sym:
        if (e->sym == th.unit && e->kids.empty()) {
            out += "1";
            return;
        }
        if (e->sym == th.dot && e->kids.size() == 2) {
            paren(2, [&] {
                print_rec(e->kids[0], th, 3, out);
                out += ".";
                print_rec(e->kids[1], th, 2, out);
            });
            return;
        }
        if (e->sym == th.par && e->kids.size() == 2) {
            paren(1, [&] {
                print_rec(e->kids[0], th, 2, out);
                out += "||";
                print_rec(e->kids[1], th, 1, out);
            });
            return;
        }
        out += th.sig.name(e->sym);
        if (!e->kids.empty()) {
            out += "(";
            for (size_t i = 0; i < e->kids.size(); ++i) {
                if (i)
                    out += ",";
                print_rec(e->kids[i], th, 0, out);
            }
            out += ")";
        }
        return;
    case ExprKind::Mu: {
        StarShape s = match_star(e, th);
        if (s.matches) {
            print_rec(s.body, th, 4, out);
            out += s.parallel ? "^||" : "*";
            return;
        }
        paren(0, [&] {
            out += "mu " + e->rec + ". ";
            print_rec(e->kids[0], th, 0, out);
        });
        return;
    }
    }
}

} // namespace

std::string expr_to_string(const ExprPtr& e, const TheoryConfig& th) {
    std::string out;
    print_rec(e, th, 0, out);
    return out;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace {

struct Lexer {
    const std::string& text;
    size_t pos = 0;
    int line = 1, col = 1;

    explicit Lexer(const std::string& t) : text(t) {}

    void advance(size_t n) {
        for (size_t i = 0; i < n && pos < text.size(); ++i) {
            if (text[pos] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
            ++pos;
        }
    }
    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
            advance(1);
    }
    bool eat(const std::string& tok) {
        skip_ws();
        if (text.compare(pos, tok.size(), tok) == 0) {
            advance(tok.size());
            return true;
        }
        return false;
    }
    bool peek(const std::string& tok) {
        skip_ws();
        return text.compare(pos, tok.size(), tok) == 0;
    }
    std::string ident() {
        skip_ws();
        size_t start = pos;
        while (pos < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[pos])) ||
                text[pos] == '_' || text[pos] == '\''))
            advance(1);
        return text.substr(start, pos - start);
    }
    [[noreturn]] void fail(const std::string& msg) {
        throw ParseError(msg, line, col);
    }
    bool done() {
        skip_ws();
        return pos >= text.size();
    }
};

struct ExprParser {
    Lexer lex;
    const TheoryConfig& th;
    std::vector<std::string> scope;

    ExprParser(const std::string& text, const TheoryConfig& th_)
        : lex(text), th(th_) {}

    ExprPtr parse() {
        ExprPtr e = sum();
        if (!lex.done())
            lex.fail("trailing input after expression");
        return e;
    }

    // +, '.', '||' all associate to the right, matching the printer.
    ExprPtr sum() {
        ExprPtr e = par();
        if (lex.eat("+"))
            return mk_plus(e, sum());
        return e;
    }

    ExprPtr par() {
        ExprPtr e = product();
        if (lex.peek("||")) {
            lex.eat("||");
            if (th.par < 0)
                lex.fail("theory has no parallel product");
            return mk_sym(th.par, {e, par()});
        }
        return e;
    }

    ExprPtr product() {
        ExprPtr e = postfix();
        if (lex.peek(".")) {
            lex.eat(".");
            if (th.dot < 0)
                lex.fail("theory has no sequential product");
            return mk_sym(th.dot, {e, product()});
        }
        return e;
    }

    ExprPtr postfix() {
        ExprPtr e = atom();
        while (true) {
            if (lex.peek("^||")) {
                lex.eat("^||");
                e = parstar(e, th);
            } else if (lex.peek("*")) {
                lex.eat("*");
                e = star(e, th);
            } else {
                break;
            }
        }
        return e;
    }

    ExprPtr atom() {
        lex.skip_ws();
        if (lex.eat("(")) {
            ExprPtr e = sum();
            if (!lex.eat(")"))
                lex.fail("expected ')'");
            return e;
        }
        if (lex.eat("0"))
            return mk_zero();
        if (lex.eat("1")) {
            if (!th.has_unit())
                lex.fail("theory has no unit");
            return mk_one(th);
        }
        int l = lex.line, c = lex.col;
        std::string id = lex.ident();
        if (id.empty())
            lex.fail("expected an expression");
        if (id == "mu") {
            std::string x = lex.ident();
            if (x.empty())
                lex.fail("expected a recursion variable after 'mu'");
            if (!lex.eat("."))
                lex.fail("expected '.' after the mu binder");
            scope.push_back(x);
            ExprPtr body = sum();
            scope.pop_back();
            return mk_mu(x, body);
        }
        if (std::find(scope.rbegin(), scope.rend(), id) != scope.rend())
            return mk_rec(id);
        if (VarId v = th.var_id(id); v >= 0)
            return mk_var(v);
        if (SymId s = th.sig.find(id); s >= 0) {
            int k = th.sig.arity(s);
            std::vector<ExprPtr> kids;
            if (k > 0) {
                if (!lex.eat("("))
                    lex.fail("symbol '" + id + "' expects " + std::to_string(k) +
                             " arguments");
                for (int i = 0; i < k; ++i) {
                    if (i && !lex.eat(","))
                        lex.fail("expected ','");
                    kids.push_back(sum());
                }
                if (!lex.eat(")"))
                    lex.fail("expected ')'");
            }
            return mk_sym(s, std::move(kids));
        }
        throw ParseError("unknown identifier '" + id + "'", l, c);
    }
};

} // namespace

ExprPtr parse_expr(const std::string& text, const TheoryConfig& th) {
    ExprParser p(text, th);
    return p.parse();
}

} // namespace kah
