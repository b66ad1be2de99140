#include "cfa/fj_ast.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace cfa::fj {

std::optional<ClassId> FjProgram::class_named(const std::string& name) const {
  for (const ClassDecl& c : classes_)
    if (c.name == name) return c.id;
  return std::nullopt;
}

bool FjProgram::is_subclass(ClassId sub, ClassId super) const {
  for (;;) {
    if (sub == super) return true;
    if (!classes_[sub].parent) return false;
    sub = *classes_[sub].parent;
  }
}

std::optional<MethodId> FjProgram::dispatch(ClassId c,
                                            const std::string& m) const {
  for (std::optional<ClassId> cur = c; cur; cur = classes_[*cur].parent) {
    auto it = classes_[*cur].methods.find(m);
    if (it != classes_[*cur].methods.end()) return it->second;
  }
  return std::nullopt;
}

std::string FjProgram::method_display(MethodId id) const {
  const MethodDecl& m = methods_[id];
  if (m.is_main) return "main";
  return classes_[m.owner].name + "::" + m.name;
}

namespace {

struct Token {
  enum class Kind { Ident, Punct, End };
  Kind kind = Kind::End;
  std::string text;
  SourcePos pos;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }

  Token pop() {
    Token t = tok_;
    advance();
    return t;
  }

  bool at(const std::string& text) const { return tok_.text == text; }

 private:
  void advance() {
    while (i_ < src_.size()) {
      char c = src_[i_];
      if (c == '/' && i_ + 1 < src_.size() && src_[i_ + 1] == '/') {
        while (i_ < src_.size() && src_[i_] != '\n') step();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        step();
      } else {
        break;
      }
    }
    tok_ = Token{};
    tok_.pos = pos_;
    if (i_ >= src_.size()) return;
    char c = src_[i_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      tok_.kind = Token::Kind::Ident;
      while (i_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[i_])) ||
              src_[i_] == '_'))
        tok_.text += step();
      return;
    }
    if (std::string("{}();,=.").find(c) != std::string::npos) {
      tok_.kind = Token::Kind::Punct;
      tok_.text = step();
      return;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", pos_);
  }

  char step() {
    char c = src_[i_++];
    if (c == '\n') {
      pos_.line++;
      pos_.col = 1;
    } else {
      pos_.col++;
    }
    return c;
  }

  const std::string& src_;
  std::size_t i_ = 0;
  SourcePos pos_{1, 1};
  Token tok_;
};

const std::set<std::string> kFjKeywords = {"class", "extends", "super",
                                           "this",  "new",     "return",
                                           "main"};

}  // namespace

class FjBuilder {
 public:
  FjProgramPtr build(const std::string& source) {
    prog_ = std::make_shared<FjProgram>();
    lex_ = std::make_unique<Lexer>(source);

    // Implicit root class Object: no fields, nullary constructor.
    ClassDecl object;
    object.id = 0;
    object.name = "Object";
    prog_->classes_.push_back(object);
    prog_->var_names_.push_back("this");
    prog_->this_var_ = 0;

    while (lex_->at("class")) parse_class_header();
    if (!lex_->at("main"))
      throw ParseError("expected main block after class declarations",
                       lex_->peek().pos);
    resolve_classes();
    parse_all_bodies();
    parse_main();
    if (lex_->peek().kind != Token::Kind::End)
      throw ParseError("trailing input after main block", lex_->peek().pos);
    finalize();
    return prog_;
  }

 private:
  // Raw, unresolved pieces captured on the first pass.
  struct RawMethod {
    std::string ret_type, name;
    std::vector<std::pair<std::string, std::string>> params;  // type, name
    std::vector<Token> body;
    SourcePos pos;
  };
  struct RawCtor {
    std::vector<std::pair<std::string, std::string>> params;
    std::vector<std::string> super_args;
    std::vector<std::pair<std::string, std::string>> assigns;  // f = g
    SourcePos pos;
    bool present = false;
  };
  struct RawClass {
    std::string name, parent;
    std::vector<std::pair<std::string, std::string>> fields;  // type, name
    RawCtor ctor;
    std::vector<RawMethod> methods;
    SourcePos pos;
  };

  std::shared_ptr<FjProgram> prog_;
  std::unique_ptr<Lexer> lex_;
  std::vector<RawClass> raw_;
  std::map<std::string, VarId> field_ids_;  // field names are program-wide

  Token expect_ident() {
    Token t = lex_->pop();
    if (t.kind != Token::Kind::Ident)
      throw ParseError("expected identifier, got '" + t.text + "'", t.pos);
    if (kFjKeywords.count(t.text) && t.text != "this")
      throw ParseError("keyword '" + t.text + "' not allowed here", t.pos);
    return t;
  }

  void expect(const std::string& text) {
    Token t = lex_->pop();
    if (t.text != text)
      throw ParseError("expected '" + text + "', got '" + t.text + "'",
                       t.pos);
  }

  std::vector<std::pair<std::string, std::string>> parse_typed_params() {
    std::vector<std::pair<std::string, std::string>> out;
    expect("(");
    if (!lex_->at(")")) {
      for (;;) {
        Token type = expect_ident();
        Token name = expect_ident();
        if (type.text == "this" || name.text == "this")
          throw ParseError("'this' cannot appear in a parameter list",
                           name.pos);
        out.emplace_back(type.text, name.text);
        if (lex_->at(",")) {
          lex_->pop();
          continue;
        }
        break;
      }
    }
    expect(")");
    return out;
  }

  std::vector<Token> capture_braced_body() {
    expect("{");
    std::vector<Token> body;
    int depth = 1;
    for (;;) {
      Token t = lex_->pop();
      if (t.kind == Token::Kind::End)
        throw ParseError("unterminated '{'", t.pos);
      if (t.text == "{") depth++;
      if (t.text == "}" && --depth == 0) break;
      body.push_back(t);
    }
    return body;
  }

  void parse_class_header() {
    RawClass rc;
    rc.pos = lex_->peek().pos;
    expect("class");
    rc.name = expect_ident().text;
    expect("extends");
    rc.parent = expect_ident().text;
    expect("{");
    while (!lex_->at("}")) {
      Token first = lex_->pop();
      if (first.kind != Token::Kind::Ident)
        throw ParseError("expected member declaration", first.pos);
      if (first.text == rc.name && lex_->at("(")) {
        if (rc.ctor.present)
          throw ParseError("duplicate constructor", first.pos);
        rc.ctor = parse_ctor(first.pos);
        continue;
      }
      Token second = expect_ident();
      if (lex_->at(";")) {
        lex_->pop();
        rc.fields.emplace_back(first.text, second.text);
        continue;
      }
      if (lex_->at("(")) {
        RawMethod m;
        m.pos = first.pos;
        m.ret_type = first.text;
        m.name = second.text;
        m.params = parse_typed_params();
        m.body = capture_braced_body();
        rc.methods.push_back(std::move(m));
        continue;
      }
      throw ParseError("malformed member declaration", second.pos);
    }
    expect("}");
    if (!rc.ctor.present)
      throw ParseError("class " + rc.name + " lacks a constructor", rc.pos);
    raw_.push_back(std::move(rc));
  }

  RawCtor parse_ctor(SourcePos pos) {
    RawCtor ctor;
    ctor.present = true;
    ctor.pos = pos;
    ctor.params = parse_typed_params();
    expect("{");
    expect("super");
    expect("(");
    if (!lex_->at(")")) {
      for (;;) {
        ctor.super_args.push_back(expect_ident().text);
        if (lex_->at(",")) {
          lex_->pop();
          continue;
        }
        break;
      }
    }
    expect(")");
    expect(";");
    while (!lex_->at("}")) {
      expect("this");
      expect(".");
      std::string field = expect_ident().text;
      expect("=");
      std::string src = expect_ident().text;
      expect(";");
      ctor.assigns.emplace_back(field, src);
    }
    expect("}");
    return ctor;
  }

  VarId field_id(const std::string& name) {
    auto it = field_ids_.find(name);
    if (it != field_ids_.end()) return it->second;
    VarId id = static_cast<VarId>(prog_->var_names_.size());
    prog_->var_names_.push_back(name);
    field_ids_.emplace(name, id);
    return id;
  }

  VarId fresh_var(const std::string& name) {
    VarId id = static_cast<VarId>(prog_->var_names_.size());
    prog_->var_names_.push_back(name);
    return id;
  }

  // Resolves inheritance, field vectors, and constructor routing plans.
  void resolve_classes() {
    for (const RawClass& rc : raw_) {
      if (prog_->class_named(rc.name))
        throw ParseError("duplicate class " + rc.name, rc.pos);
      ClassDecl decl;
      decl.id = static_cast<ClassId>(prog_->classes_.size());
      decl.name = rc.name;
      prog_->classes_.push_back(std::move(decl));
    }
    for (std::size_t i = 0; i < raw_.size(); ++i) {
      ClassDecl& decl = prog_->classes_[i + 1];
      auto parent = prog_->class_named(raw_[i].parent);
      if (!parent)
        throw ParseError("unknown parent class " + raw_[i].parent,
                         raw_[i].pos);
      // Classes extend earlier classes, so the hierarchy is acyclic.
      if (*parent >= decl.id)
        throw ParseError(
            "class " + decl.name + " must extend an earlier class",
            raw_[i].pos);
      decl.parent = parent;
      for (const auto& [type, name] : raw_[i].fields) {
        decl.own_fields.push_back(field_id(name));
        decl.own_field_types.push_back(type);
      }
    }

    prog_->field_vectors_.resize(prog_->classes_.size());
    for (ClassId c = 0; c < prog_->classes_.size(); ++c) {
      std::vector<VarId> vec;
      if (prog_->classes_[c].parent)
        vec = prog_->field_vectors_[*prog_->classes_[c].parent];
      for (VarId f : prog_->classes_[c].own_fields) {
        if (std::find(vec.begin(), vec.end(), f) != vec.end())
          throw ParseError("duplicate field " + prog_->var_names_[f] +
                               " in class " + prog_->classes_[c].name +
                               " (including inherited)",
                           raw_[c - 1].pos);
        vec.push_back(f);
      }
      prog_->field_vectors_[c] = std::move(vec);
    }

    // Constructor routing: field i of the full vector gets ctor param j.
    for (std::size_t i = 0; i < raw_.size(); ++i) {
      ClassId cid = static_cast<ClassId>(i + 1);
      ClassDecl& decl = prog_->classes_[cid];
      const RawCtor& rc = raw_[i].ctor;
      Konst k;
      std::map<std::string, std::size_t> param_index;
      for (const auto& [type, name] : rc.params) {
        if (param_index.count(name))
          throw ParseError("duplicate constructor parameter " + name,
                           rc.pos);
        param_index[name] = k.params.size();
        k.params.push_back(field_id(name));
        k.param_types.push_back(type);
      }
      auto param_of = [&](const std::string& name) {
        auto it = param_index.find(name);
        if (it == param_index.end())
          throw ParseError("constructor of " + decl.name +
                               " references non-parameter " + name,
                           rc.pos);
        return it->second;
      };

      const ClassDecl& parent = prog_->cls(*decl.parent);
      if (rc.super_args.size() != parent.ctor.params.size())
        throw ParseError("super(...) arity mismatch in " + decl.name +
                             ": parent takes " +
                             std::to_string(parent.ctor.params.size()),
                         rc.pos);

      const auto& parent_vec = prog_->field_vectors_[*decl.parent];
      k.field_source.resize(prog_->field_vectors_[cid].size());
      for (std::size_t fi = 0; fi < parent_vec.size(); ++fi) {
        std::size_t parent_param = parent.ctor.field_source[fi];
        k.field_source[fi] = param_of(rc.super_args[parent_param]);
      }
      std::set<VarId> assigned;
      for (const auto& [field, src] : rc.assigns) {
        VarId f = field_id(field);
        auto pos =
            std::find(decl.own_fields.begin(), decl.own_fields.end(), f);
        if (pos == decl.own_fields.end())
          throw ParseError("constructor of " + decl.name +
                               " assigns non-own field " + field,
                           rc.pos);
        if (!assigned.insert(f).second)
          throw ParseError("field " + field + " assigned twice", rc.pos);
        std::size_t fi =
            parent_vec.size() + (pos - decl.own_fields.begin());
        k.field_source[fi] = param_of(src);
      }
      if (assigned.size() != decl.own_fields.size())
        throw ParseError("constructor of " + decl.name +
                             " must assign every own field exactly once",
                         rc.pos);
      decl.ctor = std::move(k);
    }
  }

  void parse_all_bodies() {
    for (std::size_t i = 0; i < raw_.size(); ++i) {
      ClassId cid = static_cast<ClassId>(i + 1);
      for (const RawMethod& rm : raw_[i].methods) {
        if (prog_->classes_[cid].methods.count(rm.name))
          throw ParseError("duplicate method " + rm.name + " in class " +
                               prog_->classes_[cid].name,
                           rm.pos);
        MethodId mid = build_method(cid, rm);
        prog_->classes_[cid].methods.emplace(rm.name, mid);
      }
    }
  }

  void parse_main() {
    SourcePos pos = lex_->peek().pos;
    expect("main");
    RawMethod rm;
    rm.pos = pos;
    rm.name = "$main";
    rm.body = capture_braced_body();
    MethodId mid = build_method(std::nullopt, rm);
    prog_->methods_[mid].is_main = true;
    prog_->main_id_ = mid;
  }

  // --- statement parsing over a captured token stream ---

  struct BodyCursor {
    const std::vector<Token>& toks;
    std::size_t i = 0;
    SourcePos end_pos;

    bool done() const { return i >= toks.size(); }
    const Token& peek() const {
      static const Token end{Token::Kind::End, "", {}};
      return i < toks.size() ? toks[i] : end;
    }
    Token pop() {
      if (done()) throw ParseError("unexpected end of body", end_pos);
      return toks[i++];
    }
    void expect(const std::string& text) {
      Token t = pop();
      if (t.text != text)
        throw ParseError("expected '" + text + "', got '" + t.text + "'",
                         t.pos);
    }
  };

  MethodId build_method(std::optional<ClassId> owner, const RawMethod& rm) {
    MethodDecl m;
    m.id = static_cast<MethodId>(prog_->methods_.size());
    m.owner = owner.value_or(0);
    m.is_main = !owner.has_value();
    m.name = rm.name;
    m.ret_type = rm.ret_type;

    std::map<std::string, VarId> scope;
    for (const auto& [type, name] : rm.params) {
      if (scope.count(name))
        throw ParseError("duplicate parameter " + name, rm.pos);
      VarId v = fresh_var(name);
      scope.emplace(name, v);
      m.params.push_back(v);
    }

    BodyCursor cur{rm.body, 0, rm.pos};
    std::vector<Stmt> body;
    bool saw_return = false;
    while (!cur.done()) {
      if (saw_return)
        throw ParseError("return must be the last statement",
                         cur.peek().pos);
      Token first = cur.pop();
      if (first.text == "return") {
        Stmt s;
        s.kind = StmtKind::Return;
        s.pos = first.pos;
        s.ret = resolve_var(cur.pop(), scope, owner.has_value());
        cur.expect(";");
        body.push_back(s);
        saw_return = true;
        continue;
      }
      if (first.kind != Token::Kind::Ident || first.text == "this")
        throw ParseError("expected statement", first.pos);

      // `T v;` or `T v = e;` declares a local; `v = e;` assigns.
      if (cur.peek().kind == Token::Kind::Ident &&
          cur.peek().text != "this") {
        Token name = cur.pop();
        if (scope.count(name.text))
          throw ParseError("duplicate local " + name.text, name.pos);
        VarId v = fresh_var(name.text);
        scope.emplace(name.text, v);
        m.locals.push_back(v);
        if (cur.peek().text == ";") {
          cur.pop();
          continue;
        }
        cur.expect("=");
        Stmt s;
        s.kind = StmtKind::Assign;
        s.pos = first.pos;
        s.target = v;
        s.expr = parse_expr(cur, scope, owner.has_value());
        cur.expect(";");
        body.push_back(s);
        continue;
      }
      auto it = scope.find(first.text);
      if (it == scope.end())
        throw ParseError("undeclared variable " + first.text, first.pos);
      cur.expect("=");
      Stmt s;
      s.kind = StmtKind::Assign;
      s.pos = first.pos;
      s.target = it->second;
      s.expr = parse_expr(cur, scope, owner.has_value());
      cur.expect(";");
      body.push_back(s);
    }
    if (body.empty() || body.back().kind != StmtKind::Return)
      throw ParseError(
          "method " + rm.name + " must end with a return statement", rm.pos);

    m.entry = static_cast<Label>(prog_->stmts_.size());
    for (std::size_t i = 0; i < body.size(); ++i) {
      Stmt s = body[i];
      s.label = static_cast<Label>(prog_->stmts_.size());
      s.owner = m.id;
      prog_->stmts_.push_back(s);
      prog_->succ_.push_back(i + 1 < body.size()
                                 ? std::optional<Label>(s.label + 1)
                                 : std::nullopt);
    }
    m.last = static_cast<Label>(prog_->stmts_.size() - 1);
    prog_->methods_.push_back(std::move(m));
    return prog_->methods_.back().id;
  }

  VarId resolve_var(const Token& t,
                    const std::map<std::string, VarId>& scope,
                    bool has_this) {
    if (t.kind != Token::Kind::Ident)
      throw ParseError("expected variable, got '" + t.text + "'", t.pos);
    if (t.text == "this") {
      if (!has_this)
        throw ParseError("'this' is not available in main", t.pos);
      return prog_->this_var_;
    }
    auto it = scope.find(t.text);
    if (it == scope.end())
      throw ParseError("undeclared variable " + t.text, t.pos);
    return it->second;
  }

  std::vector<VarId> parse_arg_vars(
      BodyCursor& cur, const std::map<std::string, VarId>& scope,
      bool has_this) {
    std::vector<VarId> out;
    cur.expect("(");
    if (cur.peek().text != ")") {
      for (;;) {
        Token t = cur.pop();
        if (t.text == "(" || t.text == "new")
          throw ParseError(
              "arguments must be atomically evaluable (A-normal form)",
              t.pos);
        out.push_back(resolve_var(t, scope, has_this));
        prog_->term_count_++;
        if (cur.peek().text == ".")
          throw ParseError(
              "arguments must be atomically evaluable (A-normal form)",
              cur.peek().pos);
        if (cur.peek().text == ",") {
          cur.pop();
          continue;
        }
        break;
      }
    }
    cur.expect(")");
    return out;
  }

  Expr parse_expr(BodyCursor& cur, const std::map<std::string, VarId>& scope,
                  bool has_this) {
    Expr e;
    Token first = cur.pop();
    prog_->term_count_++;
    if (first.text == "new") {
      Token cls = cur.pop();
      e.kind = ExprKind::New;
      e.cls = resolve_class(cls);
      e.args = parse_arg_vars(cur, scope, has_this);
      if (e.args.size() != prog_->cls(e.cls).ctor.params.size())
        throw ParseError("constructor arity mismatch for " + cls.text,
                         cls.pos);
      return e;
    }
    if (first.text == "(") {
      Token cls = cur.pop();
      e.kind = ExprKind::Cast;
      e.cls = resolve_class(cls);
      cur.expect(")");
      e.v0 = resolve_var(cur.pop(), scope, has_this);
      return e;
    }
    e.v0 = resolve_var(first, scope, has_this);
    if (cur.peek().text != ".") {
      e.kind = ExprKind::Var;
      return e;
    }
    cur.pop();  // '.'
    Token member = cur.pop();
    if (member.kind != Token::Kind::Ident)
      throw ParseError("expected member name", member.pos);
    if (cur.peek().text == "(") {
      e.kind = ExprKind::Invoke;
      e.method = member.text;
      e.args = parse_arg_vars(cur, scope, has_this);
      return e;
    }
    e.kind = ExprKind::FieldRead;
    e.field = field_id(member.text);
    return e;
  }

  ClassId resolve_class(const Token& t) {
    if (t.kind != Token::Kind::Ident)
      throw ParseError("expected class name", t.pos);
    auto id = prog_->class_named(t.text);
    if (!id) throw ParseError("unknown class " + t.text, t.pos);
    return *id;
  }

  void finalize() {
    prog_->term_count_ += prog_->stmts_.size() + prog_->classes_.size() +
                          prog_->methods_.size();
    // Invocations need a successor for their continuation, so they cannot
    // be the final statement of a body (the final one is a return anyway).
    for (const Stmt& s : prog_->stmts_) {
      if (s.kind == StmtKind::Assign && s.expr.kind == ExprKind::Invoke &&
          !prog_->succ_[s.label])
        throw ParseError("method invocation cannot be the final statement",
                         s.pos);
    }
  }
};

FjProgramPtr parse_fj(const std::string& source) {
  return FjBuilder().build(source);
}

}  // namespace cfa::fj
