#pragma once

// Concrete surface syntax. Binders are alpha-renamed to globally unique names
// during parsing, so substitution never has to worry about capture.
//
//   fun x -> e                 lambda (optional ": (ty, region)" annotation)
//   Fun {a, r, eff} x -> e     polymorphic lambda
//   letrec f {a, r, eff} x = e1 [s] at e2 in e3
//   e @ (ty, r)                type application; regions: glob | ident | regionOf(x)
//   v [s] at e                 allocation ([s] omitted = unbounded)
//   newrgn [s], freergn e, split [s] e, copy e into e
//   ref e, !e, e := e, e; e, if/then/else, let x = e in e
//   integer binops + - == >    (left operand's region hosts the result)

#include <cctype>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "spegion/syntax.hpp"

namespace spegion {

struct ParseError {
    Span span;
    std::string message;
};

using ParseResult = std::variant<TermRef, ParseError>;

inline bool parse_ok(const ParseResult &r) { return std::holds_alternative<TermRef>(r); }

namespace detail {

struct Token {
    enum class Kind : std::uint8_t { Ident, Keyword, Int, Symbol, End };
    Kind kind = Kind::End;
    std::string text;
    long long value = 0;
    Span span;
};

inline const std::set<std::string> &keywords() {
    static const std::set<std::string> kw = {
        "let",  "letrec",  "in",    "if",    "then",    "else", "fun",  "Fun",
        "ref",  "newrgn",  "freergn", "split", "copy",  "into", "at",   "glob",
        "true", "false",   "regionOf", "w",   "Int",    "Unit", "Bool", "Ref"};
    return kw;
}

class Lexer {
  public:
    explicit Lexer(const std::string &src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (true) {
            skip_trivia();
            if (pos_ >= src_.size()) break;
            out.push_back(next());
        }
        out.push_back(Token{Token::Kind::End, "", 0, here(0)});
        return out;
    }

    std::optional<ParseError> error;

  private:
    const std::string &src_;
    std::size_t pos_ = 0;
    int line_ = 1, col_ = 1;

    Span here(int len) const { return Span{line_, col_, len}; }

    char peek(std::size_t off = 0) const {
        return pos_ + off < src_.size() ? src_[pos_ + off] : '\0';
    }

    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_trivia() {
        while (pos_ < src_.size()) {
            if (std::isspace(static_cast<unsigned char>(peek()))) {
                advance();
            } else if (peek() == '-' && peek(1) == '-') {
                while (pos_ < src_.size() && peek() != '\n') advance();
            } else {
                break;
            }
        }
    }

    Token next() {
        Span sp = here(1);
        char c = peek();
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::string text;
            while (std::isdigit(static_cast<unsigned char>(peek()))) {
                text += peek();
                advance();
            }
            sp.len = static_cast<int>(text.size());
            return Token{Token::Kind::Int, text, std::stoll(text), sp};
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string text;
            while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                   peek() == '\'') {
                text += peek();
                advance();
            }
            sp.len = static_cast<int>(text.size());
            bool kw = keywords().count(text) > 0;
            return Token{kw ? Token::Kind::Keyword : Token::Kind::Ident, text, 0, sp};
        }
        // multi-character symbols first
        static const char *two_char[] = {":=", "==", "!=", "<=", ">=", "->"};
        for (const char *s : two_char) {
            if (peek() == s[0] && peek(1) == s[1]) {
                advance();
                advance();
                sp.len = 2;
                return Token{Token::Kind::Symbol, s, 0, sp};
            }
        }
        static const std::string singles = "()[]{},;:@!+-*=><";
        if (singles.find(c) != std::string::npos) {
            advance();
            return Token{Token::Kind::Symbol, std::string(1, c), 0, sp};
        }
        if (!error) error = ParseError{sp, std::string("unexpected character '") + c + "'"};
        advance();
        return Token{Token::Kind::Symbol, std::string(1, c), 0, sp};
    }
};

// Parsed item: either a proper term or a value still waiting for its
// allocation site.
struct PExpr {
    std::variant<TermRef, Value> item;
    Span span;

    bool is_value() const { return std::holds_alternative<Value>(item); }
};

struct ParseFail {
    ParseError err;
};

class Parser {
  public:
    Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

    ParseResult run() {
        try {
            Scope scope;
            PExpr p = parse_seq(scope);
            expect_end();
            return to_term(p);
        } catch (const ParseFail &f) {
            return f.err;
        }
    }

  private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::set<std::string> used_names_;

    struct Scope {
        std::map<std::string, std::string> names;  // source name -> unique name
    };

    [[noreturn]] void fail(Span sp, std::string msg) const {
        throw ParseFail{ParseError{sp, std::move(msg)}};
    }

    const Token &peek(std::size_t off = 0) const {
        std::size_t i = pos_ + off;
        return i < toks_.size() ? toks_[i] : toks_.back();
    }

    Token take() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

    bool at_symbol(const std::string &s) const {
        return peek().kind == Token::Kind::Symbol && peek().text == s;
    }
    bool at_keyword(const std::string &s) const {
        return peek().kind == Token::Kind::Keyword && peek().text == s;
    }

    Token expect_symbol(const std::string &s) {
        if (!at_symbol(s)) fail(peek().span, "expected '" + s + "', got '" + peek().text + "'");
        return take();
    }
    Token expect_keyword(const std::string &s) {
        if (!at_keyword(s)) fail(peek().span, "expected '" + s + "', got '" + peek().text + "'");
        return take();
    }
    Token expect_ident() {
        if (peek().kind != Token::Kind::Ident)
            fail(peek().span, "expected an identifier, got '" + peek().text + "'");
        return take();
    }
    void expect_end() {
        if (peek().kind != Token::Kind::End)
            fail(peek().span, "unexpected trailing input '" + peek().text + "'");
    }

    TermRef to_term(const PExpr &p) const {
        if (const auto *t = std::get_if<TermRef>(&p.item)) return *t;
        fail(p.span, "a value must be allocated: write 'v [size] at e' or 'v at e'");
    }

    std::string bind(Scope &scope, const std::string &src_name) {
        std::string unique = src_name;
        while (!used_names_.insert(unique).second) unique += "'";
        scope.names[src_name] = unique;
        return unique;
    }

    std::string resolve(const Scope &scope, const Token &tok) const {
        auto it = scope.names.find(tok.text);
        if (it == scope.names.end()) return tok.text;  // checker reports unbound names
        return it->second;
    }

    // --- sizes ------------------------------------------------------------

    Size parse_size_atom() {
        if (peek().kind == Token::Kind::Int) return Size::of(static_cast<std::uint64_t>(take().value));
        if (at_keyword("w")) {
            take();
            return Size::omega();
        }
        if (peek().kind == Token::Kind::Ident) return Size::symbolic(take().text);
        fail(peek().span, "expected a size (number, 'w' or a size variable)");
    }

    Size parse_size() {
        Size first = parse_size_atom();
        static const std::set<std::string> ops = {"+", "*", "-", "=", "!=", "<=", ">="};
        if (peek().kind == Token::Kind::Symbol && ops.count(peek().text)) {
            // compound size expression: kept symbolic, rejected by the checker
            std::string text = first.str();
            while (peek().kind == Token::Kind::Symbol && ops.count(peek().text)) {
                text += " " + take().text;
                text += " " + parse_size_atom().str();
            }
            return Size::symbolic(text);
        }
        return first;
    }

    Size parse_size_brackets() {
        expect_symbol("[");
        Size s = parse_size();
        expect_symbol("]");
        return s;
    }

    // --- surface types ------------------------------------------------------

    SurfaceTypeRef parse_surface_type(const Scope &scope) {
        if (at_keyword("Int")) {
            take();
            return sty::int_();
        }
        if (at_keyword("Unit")) {
            take();
            return sty::unit();
        }
        if (at_keyword("Bool")) {
            take();
            return sty::bool_();
        }
        if (at_keyword("Ref")) {
            take();
            return sty::ref(parse_surface_type(scope));
        }
        if (peek().kind == Token::Kind::Ident) {
            Token t = take();
            return sty::var(resolve(scope, t));
        }
        fail(peek().span, "expected a type");
    }

    SurfaceRegion parse_surface_region(const Scope &scope) {
        if (at_keyword("glob")) {
            take();
            return SurfaceRegion{SurfaceRegion::Kind::Glob, ""};
        }
        if (at_keyword("regionOf")) {
            take();
            expect_symbol("(");
            Token x = expect_ident();
            expect_symbol(")");
            return SurfaceRegion{SurfaceRegion::Kind::RegionOf, resolve(scope, x)};
        }
        Token t = expect_ident();
        return SurfaceRegion{SurfaceRegion::Kind::Ident, resolve(scope, t)};
    }

    SurfaceTypeWithPlace parse_annot(const Scope &scope) {
        expect_symbol("(");
        SurfaceTypeRef t = parse_surface_type(scope);
        expect_symbol(",");
        SurfaceRegion r = parse_surface_region(scope);
        expect_symbol(")");
        return SurfaceTypeWithPlace{std::move(t), std::move(r)};
    }

    // --- expressions ----------------------------------------------------------

    PExpr parse_seq(Scope &scope) {
        PExpr first = parse_stmt(scope);
        if (at_symbol(";")) {
            Span sp = take().span;
            PExpr rest = parse_seq(scope);
            return PExpr{tm::mk(SeqT{to_term(first), to_term(rest)}, sp), sp};
        }
        return first;
    }

    PExpr parse_stmt(Scope &scope) {
        if (at_keyword("let")) {
            Span sp = take().span;
            Token x = expect_ident();
            expect_symbol("=");
            PExpr bound = parse_stmt(scope);
            expect_keyword("in");
            Scope inner = scope;
            std::string unique = bind(inner, x.text);
            PExpr body = parse_seq(inner);
            return PExpr{tm::mk(LetT{unique, to_term(bound), to_term(body)}, sp), sp};
        }
        if (at_keyword("letrec")) return parse_letrec(scope);
        if (at_keyword("if")) {
            Span sp = take().span;
            PExpr cond = parse_assign(scope);
            expect_keyword("then");
            PExpr then_branch = parse_stmt(scope);
            expect_keyword("else");
            PExpr else_branch = parse_stmt(scope);
            return PExpr{tm::mk(IfT{to_term(cond), to_term(then_branch), to_term(else_branch)}, sp),
                         sp};
        }
        return parse_assign(scope);
    }

    PExpr parse_letrec(Scope &scope) {
        Span sp = expect_keyword("letrec").span;
        Token f = expect_ident();
        expect_symbol("{");
        Token a = expect_ident();
        expect_symbol(",");
        Token r = expect_ident();
        expect_symbol(",");
        Token eps = expect_ident();
        expect_symbol("}");
        Token x = expect_ident();
        expect_symbol("=");

        Scope body_scope = scope;
        std::string fu = bind(body_scope, f.text);
        std::string au = bind(body_scope, a.text);
        std::string ru = bind(body_scope, r.text);
        std::string eu = bind(body_scope, eps.text);
        std::string xu = bind(body_scope, x.text);
        PExpr body = parse_seq(body_scope);

        Size size = Size::omega();
        if (at_symbol("[")) size = parse_size_brackets();
        expect_keyword("at");
        PExpr target = parse_prefix(scope);
        expect_keyword("in");

        Scope rest_scope = scope;
        rest_scope.names[f.text] = fu;  // f stays bound in the continuation
        PExpr rest = parse_seq(rest_scope);

        Value biglam = val::biglam(au, ru, eu, xu, to_term(body));
        TermRef alloc = tm::mk(AllocT{std::move(biglam), size, to_term(target)}, sp);
        return PExpr{tm::mk(FixT{fu, std::move(alloc), to_term(rest)}, sp), sp};
    }

    PExpr parse_assign(Scope &scope) {
        PExpr lhs = parse_cmp(scope);
        if (at_symbol(":=")) {
            Span sp = take().span;
            PExpr rhs = parse_cmp(scope);
            return PExpr{tm::mk(AssignT{to_term(lhs), to_term(rhs)}, sp), sp};
        }
        return lhs;
    }

    PExpr parse_cmp(Scope &scope) {
        PExpr lhs = parse_add(scope);
        if (at_symbol("==") || at_symbol(">")) {
            Token op = take();
            PExpr rhs = parse_add(scope);
            BinOp bo = op.text == "==" ? BinOp::Eq : BinOp::Gt;
            return PExpr{tm::mk(BinOpT{bo, to_term(lhs), to_term(rhs)}, op.span), op.span};
        }
        return lhs;
    }

    PExpr parse_add(Scope &scope) {
        PExpr lhs = parse_alloc(scope);
        while (at_symbol("+") || at_symbol("-")) {
            Token op = take();
            PExpr rhs = parse_alloc(scope);
            BinOp bo = op.text == "+" ? BinOp::Add : BinOp::Sub;
            lhs = PExpr{tm::mk(BinOpT{bo, to_term(lhs), to_term(rhs)}, op.span), op.span};
        }
        return lhs;
    }

    PExpr parse_alloc(Scope &scope) {
        if (at_keyword("copy")) {
            Span sp = take().span;
            PExpr src = parse_prefix(scope);
            expect_keyword("into");
            PExpr dst = parse_prefix(scope);
            return PExpr{tm::mk(CopyT{to_term(src), to_term(dst)}, sp), sp};
        }
        PExpr p = parse_prefix(scope);
        while (at_symbol("[") || at_keyword("at")) {
            // The annotation belongs to an enclosing letrec when the parsed
            // item is already a proper term.
            if (!p.is_value()) break;
            Size size = Size::omega();
            Span sp = peek().span;
            if (at_symbol("[")) size = parse_size_brackets();
            expect_keyword("at");
            PExpr target = parse_prefix(scope);
            const Value &v = std::get<Value>(p.item);
            p = PExpr{tm::mk(AllocT{v, size, to_term(target)}, sp), sp};
        }
        return p;
    }

    PExpr parse_prefix(Scope &scope) {
        if (at_keyword("ref")) {
            Span sp = take().span;
            PExpr operand = parse_prefix(scope);
            return PExpr{tm::mk(RefMkT{to_term(operand)}, sp), sp};
        }
        if (at_symbol("!")) {
            Span sp = take().span;
            PExpr operand = parse_prefix(scope);
            return PExpr{tm::mk(DerefT{to_term(operand)}, sp), sp};
        }
        if (at_keyword("freergn")) {
            Span sp = take().span;
            PExpr operand = parse_prefix(scope);
            return PExpr{tm::mk(FreeRgnT{to_term(operand)}, sp), sp};
        }
        if (at_keyword("split")) {
            Span sp = take().span;
            Size size = parse_size_brackets();
            PExpr operand = parse_prefix(scope);
            return PExpr{tm::mk(SplitT{size, to_term(operand)}, sp), sp};
        }
        return parse_app(scope);
    }

    bool at_atom_start() const {
        if (peek().kind == Token::Kind::Ident || peek().kind == Token::Kind::Int) return true;
        if (peek().kind == Token::Kind::Symbol) return peek().text == "(";
        if (peek().kind == Token::Kind::Keyword) {
            const std::string &t = peek().text;
            return t == "glob" || t == "newrgn" || t == "true" || t == "false" || t == "fun" ||
                   t == "Fun";
        }
        return false;
    }

    PExpr parse_app(Scope &scope) {
        PExpr p = parse_atom(scope);
        while (true) {
            if (at_symbol("@")) {
                Span sp = take().span;
                SurfaceTypeWithPlace annot = parse_annot(scope);
                p = PExpr{tm::mk(TyAppT{to_term(p), std::move(annot)}, sp), sp};
                continue;
            }
            if (at_atom_start()) {
                PExpr arg = parse_atom(scope);
                Span sp = arg.span;
                p = PExpr{tm::mk(AppT{to_term(p), to_term(arg)}, sp), sp};
                continue;
            }
            break;
        }
        return p;
    }

    PExpr parse_atom(Scope &scope) {
        const Token &t = peek();
        if (t.kind == Token::Kind::Int) {
            Token tok = take();
            return PExpr{val::int_(tok.value), tok.span};
        }
        if (at_keyword("true")) return PExpr{val::true_(), take().span};
        if (at_keyword("false")) return PExpr{val::false_(), take().span};
        if (at_keyword("glob"))
            return PExpr{tm::mk(LocT{Location::global_unit()}, take().span), t.span};
        if (at_keyword("newrgn")) {
            Span sp = take().span;
            Size size = Size::omega();
            if (at_symbol("[")) size = parse_size_brackets();
            return PExpr{tm::mk(NewRgnT{size}, sp), sp};
        }
        if (at_keyword("fun")) {
            Span sp = take().span;
            Token x = expect_ident();
            std::optional<SurfaceTypeWithPlace> ann;
            Scope inner = scope;
            if (at_symbol(":")) {
                take();
                ann = parse_annot(scope);
            }
            std::string unique = bind(inner, x.text);
            expect_symbol("->");
            PExpr body = parse_seq(inner);
            return PExpr{val::lam(unique, to_term(body), std::move(ann)), sp};
        }
        if (at_keyword("Fun")) {
            Span sp = take().span;
            expect_symbol("{");
            Token a = expect_ident();
            expect_symbol(",");
            Token r = expect_ident();
            expect_symbol(",");
            Token eps = expect_ident();
            expect_symbol("}");
            Token x = expect_ident();
            Scope inner = scope;
            std::string au = bind(inner, a.text);
            std::string ru = bind(inner, r.text);
            std::string eu = bind(inner, eps.text);
            std::string xu = bind(inner, x.text);
            expect_symbol("->");
            PExpr body = parse_seq(inner);
            return PExpr{val::biglam(au, ru, eu, xu, to_term(body)), sp};
        }
        if (t.kind == Token::Kind::Ident) {
            Token tok = take();
            return PExpr{tm::mk(VarT{resolve(scope, tok)}, tok.span), tok.span};
        }
        if (at_symbol("(")) {
            Span sp = take().span;
            if (at_symbol(")")) {
                take();
                return PExpr{val::unit(), sp};
            }
            PExpr inner = parse_seq(scope);
            expect_symbol(")");
            inner.span = sp;
            return inner;
        }
        fail(t.span, "expected an expression, got '" + t.text + "'");
    }
};

}  // namespace detail

inline ParseResult parse(const std::string &source) {
    detail::Lexer lexer(source);
    std::vector<detail::Token> tokens = lexer.run();
    if (lexer.error) return *lexer.error;
    if (tokens.size() <= 1) return ParseError{Span{1, 1, 0}, "empty program"};
    detail::Parser parser(std::move(tokens));
    return parser.run();
}

}  // namespace spegion
