#include "rwrl/term.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <functional>
#include <mutex>
#include <unordered_map>

namespace rwrl {

namespace {

struct SymbolRegistry {
  std::mutex mu;
  std::deque<SymbolInfo> storage;
  std::unordered_map<std::string, SymbolInfo*> by_name;
  std::vector<Symbol> fresh;
};

SymbolRegistry& registry() {
  static SymbolRegistry r;
  return r;
}

Symbol intern_locked(SymbolRegistry& r, std::string_view name, int arity,
                     SymbolKind kind) {
  auto it = r.by_name.find(std::string(name));
  if (it != r.by_name.end()) {
    const SymbolInfo* s = it->second;
    if (s->arity != arity || s->kind != kind) {
      throw std::invalid_argument("symbol '" + std::string(name) +
                                  "' redeclared with a different arity/kind");
    }
    return s;
  }
  auto& info = r.storage.emplace_back(SymbolInfo{
      std::string(name), arity, kind,
      static_cast<std::uint32_t>(r.storage.size())});
  r.by_name.emplace(info.name, &info);
  return &info;
}

inline std::size_t mix(std::size_t h, std::size_t v) {
  return h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
}

bool is_symbol_char(char c) {
  if ((c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
      (c >= '0' && c <= '9')) {
    return true;
  }
  switch (c) {
    case '_':
    case '\\':
    case '/':
    case '*':
    case '+':
    case '=':
    case '?':
    case '^':
    case '.':
    case '-':
      return true;
    default:
      return false;
  }
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r';
}

// Returns the fresh-variable index spelled by name ("v12" -> 12), or -1.
int parse_fresh_name(std::string_view name) {
  if (name.size() < 2 || name[0] != 'v') return -1;
  if (name.size() > 2 && name[1] == '0') return -1;
  int value = 0;
  auto [ptr, ec] =
      std::from_chars(name.data() + 1, name.data() + name.size(), value);
  if (ec != std::errc() || ptr != name.data() + name.size()) return -1;
  return value;
}

class Parser {
 public:
  Parser(std::string_view text, const Signature& sig, ParseOptions opts)
      : text_(text), sig_(sig), opts_(opts) {}

  Term parse_all() {
    skip_space();
    Term t = parse_one();
    skip_space();
    if (pos_ != text_.size()) throw ParseError("trailing input", pos_);
    return t;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  std::pair<std::string_view, std::size_t> read_symbol() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && is_symbol_char(text_[pos_])) ++pos_;
    if (pos_ == start) {
      if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
      throw ParseError(std::string("unexpected character '") + text_[pos_] + "'",
                       pos_);
    }
    return {text_.substr(start, pos_ - start), start};
  }

  Symbol resolve(std::string_view name, std::size_t at) {
    if (name[0] == '?') {
      if (!opts_.allow_pattern_variables || name.size() < 2) {
        throw ParseError("pattern variable not allowed: '" + std::string(name) +
                             "'",
                         at);
      }
      return pattern_variable(name.substr(1));
    }
    if (Symbol s = sig_.find(name)) return s;
    if (sig_.allows_fresh_variables()) {
      const int idx = parse_fresh_name(name);
      if (idx >= 0) return fresh_variable(idx);
    }
    throw ParseError("unknown symbol '" + std::string(name) + "' for signature " +
                         sig_.name(),
                     at);
  }

  Term parse_one() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
    if (text_[pos_] == ')') throw ParseError("unexpected ')'", pos_);
    if (text_[pos_] != '(') {
      auto [name, at] = read_symbol();
      Symbol s = resolve(name, at);
      if (s->arity != 0) {
        throw ParseError("symbol '" + s->name + "' expects " +
                             std::to_string(s->arity) + " arguments",
                         at);
      }
      return Term(s);
    }
    ++pos_;  // '('
    auto [name, at] = read_symbol();
    Symbol s = resolve(name, at);
    std::vector<Term> kids;
    for (;;) {
      skip_space();
      if (pos_ >= text_.size()) throw ParseError("missing ')'", pos_);
      if (text_[pos_] == ')') {
        ++pos_;
        break;
      }
      kids.push_back(parse_one());
    }
    if (static_cast<int>(kids.size()) != s->arity) {
      throw ParseError("arity mismatch for '" + s->name + "': expected " +
                           std::to_string(s->arity) + ", got " +
                           std::to_string(kids.size()),
                       at);
    }
    return Term(s, std::move(kids));
  }

  std::string_view text_;
  const Signature& sig_;
  ParseOptions opts_;
  std::size_t pos_ = 0;
};

void print_into(const Term& t, std::string& out) {
  if (t.is_leaf()) {
    out += t.symbol()->name;
    return;
  }
  out += '(';
  out += t.symbol()->name;
  for (const Term& c : t.children()) {
    out += ' ';
    print_into(c, out);
  }
  out += ')';
}

bool match_into(const Term& pattern, const Term& t, Bindings& b) {
  Symbol ps = pattern.symbol();
  if (ps->kind == SymbolKind::kBoundVariable) {
    if (const Term* bound = b.find(ps)) return *bound == t;
    b.bind(ps, t);
    return true;
  }
  if (ps != t.symbol()) return false;
  for (std::size_t i = 0; i < pattern.arity(); ++i) {
    if (!match_into(pattern.child(i), t.child(i), b)) return false;
  }
  return true;
}

}  // namespace

Symbol intern_symbol(std::string_view name, int arity, SymbolKind kind) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  return intern_locked(r, name, arity, kind);
}

Symbol pattern_variable(std::string_view name) {
  return intern_symbol(name.empty() || name[0] != '?' ? "?" + std::string(name)
                                                      : std::string(name),
                       0, SymbolKind::kBoundVariable);
}

Symbol fresh_variable(int index) {
  if (index < 0) throw std::invalid_argument("negative fresh variable index");
  auto& r = registry();
  std::lock_guard lock(r.mu);
  while (static_cast<int>(r.fresh.size()) <= index) {
    const std::string name = "v" + std::to_string(r.fresh.size());
    r.fresh.push_back(intern_locked(r, name, 0, SymbolKind::kFreshVariable));
  }
  return r.fresh[index];
}

int fresh_variable_index(Symbol s) {
  if (s->kind != SymbolKind::kFreshVariable) return -1;
  return parse_fresh_name(s->name);
}

Term::Term(Symbol symbol, std::vector<Term> children) {
  if (static_cast<int>(children.size()) != symbol->arity) {
    throw std::invalid_argument("arity mismatch constructing '" + symbol->name +
                                "'");
  }
  std::size_t h = std::hash<std::uint32_t>{}(symbol->id) * 0x100000001b3ULL;
  std::size_t size = 1;
  int depth = 0;
  for (const Term& c : children) {
    h = mix(h, c.hash());
    size += c.size();
    depth = std::max(depth, c.depth() + 1);
  }
  node_ = std::make_shared<const Node>(
      Node{symbol, std::move(children), h, size, depth});
}

bool Term::operator==(const Term& other) const {
  if (node_ == other.node_) return true;
  if (node_->hash != other.node_->hash || node_->size != other.node_->size ||
      node_->symbol != other.node_->symbol) {
    return false;
  }
  for (std::size_t i = 0; i < arity(); ++i) {
    if (child(i) != other.child(i)) return false;
  }
  return true;
}

Signature::Signature(std::string name, std::vector<Symbol> symbols,
                     bool allows_fresh_variables,
                     std::vector<std::pair<std::string, std::string>> aliases)
    : name_(std::move(name)),
      symbols_(std::move(symbols)),
      fresh_(allows_fresh_variables),
      aliases_(std::move(aliases)) {}

bool Signature::contains(Symbol s) const {
  if (s->kind == SymbolKind::kFreshVariable) return fresh_;
  return std::find(symbols_.begin(), symbols_.end(), s) != symbols_.end();
}

Symbol Signature::find(std::string_view name) const {
  for (const auto& [from, to] : aliases_) {
    if (name == from) {
      name = to;
      break;
    }
  }
  for (Symbol s : symbols_) {
    if (s->name == name) return s;
  }
  return nullptr;
}

Term parse_term(std::string_view text, const Signature& signature,
                ParseOptions options) {
  return Parser(text, signature, options).parse_all();
}

std::string print_term(const Term& t) {
  std::string out;
  out.reserve(t.size() * 4);
  print_into(t, out);
  return out;
}

std::string print_path(const Path& p) {
  std::string out = "[";
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(p[i]);
  }
  out += ']';
  return out;
}

bool is_valid_path(const Term& t, const Path& p) {
  const Term* cur = &t;
  for (int idx : p) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= cur->arity()) return false;
    cur = &cur->child(idx);
  }
  return true;
}

const Term& subterm_at(const Term& t, const Path& p) {
  const Term* cur = &t;
  for (int idx : p) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= cur->arity()) {
      throw InvalidPath("invalid path " + print_path(p) + " in " +
                        print_term(t));
    }
    cur = &cur->child(idx);
  }
  return *cur;
}

namespace {
Term replace_rec(const Term& t, const Path& p, std::size_t depth,
                 Term& replacement) {
  if (depth == p.size()) return std::move(replacement);
  const int idx = p[depth];
  std::vector<Term> kids = t.children();
  kids[idx] = replace_rec(t.child(idx), p, depth + 1, replacement);
  return Term(t.symbol(), std::move(kids));
}

void paths_rec(const Term& t, Path& cur, std::vector<Path>& out) {
  out.push_back(cur);
  for (std::size_t i = 0; i < t.arity(); ++i) {
    cur.push_back(static_cast<int>(i));
    paths_rec(t.child(i), cur, out);
    cur.pop_back();
  }
}
}  // namespace

Term replace_at(const Term& t, const Path& p, Term replacement) {
  if (!is_valid_path(t, p)) {
    throw InvalidPath("invalid path " + print_path(p) + " in " + print_term(t));
  }
  return replace_rec(t, p, 0, replacement);
}

std::vector<Path> all_paths(const Term& t) {
  std::vector<Path> out;
  out.reserve(t.size());
  Path cur;
  paths_rec(t, cur, out);
  return out;
}

bool contains_symbol(const Term& t, Symbol s) {
  if (t.symbol() == s) return true;
  for (const Term& c : t.children()) {
    if (contains_symbol(c, s)) return true;
  }
  return false;
}

std::vector<Symbol> bound_variables(const Term& t) {
  std::vector<Symbol> out;
  std::function<void(const Term&)> walk = [&](const Term& u) {
    if (u.symbol()->kind == SymbolKind::kBoundVariable &&
        std::find(out.begin(), out.end(), u.symbol()) == out.end()) {
      out.push_back(u.symbol());
    }
    for (const Term& c : u.children()) walk(c);
  };
  walk(t);
  return out;
}

int max_fresh_index(const Term& t) {
  int best = fresh_variable_index(t.symbol());
  for (const Term& c : t.children()) best = std::max(best, max_fresh_index(c));
  return best;
}

const Term* Bindings::find(Symbol var) const {
  for (const auto& [k, v] : entries_) {
    if (k == var) return &v;
  }
  return nullptr;
}

void Bindings::bind(Symbol var, Term value) {
  for (auto& [k, v] : entries_) {
    if (k == var) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(var, std::move(value));
}

std::optional<Bindings> match(const Term& pattern, const Term& t) {
  Bindings b;
  if (!match_into(pattern, t, b)) return std::nullopt;
  return b;
}

Term substitute(const Term& pattern, const Bindings& bindings) {
  Symbol s = pattern.symbol();
  if (s->kind == SymbolKind::kBoundVariable) {
    const Term* bound = bindings.find(s);
    if (!bound) {
      throw std::invalid_argument("unbound pattern variable " + s->name);
    }
    return *bound;
  }
  if (pattern.is_leaf()) return pattern;
  std::vector<Term> kids;
  kids.reserve(pattern.arity());
  for (const Term& c : pattern.children()) kids.push_back(substitute(c, bindings));
  return Term(s, std::move(kids));
}

RewriteRule RewriteRule::reversed() const {
  RewriteRule r = *this;
  r.direction = direction == Direction::kForward ? Direction::kBackward
                                                 : Direction::kForward;
  return r;
}

std::vector<Symbol> RewriteRule::extra_variables() const {
  const auto from_vars = bound_variables(from());
  std::vector<Symbol> out;
  for (Symbol v : bound_variables(to())) {
    if (std::find(from_vars.begin(), from_vars.end(), v) == from_vars.end()) {
      out.push_back(v);
    }
  }
  return out;
}

std::string RewriteRule::label() const {
  return id + (direction == Direction::kForward ? ":fwd " : ":bwd ") +
         print_term(from()) + " -> " + print_term(to());
}

std::optional<Term> rewrite_at(const Term& t, const Path& p,
                               const RewriteRule& rule, const Bindings& extra) {
  const Term& target = subterm_at(t, p);
  auto b = match(rule.from(), target);
  if (!b) return std::nullopt;
  for (const auto& [var, value] : extra.entries()) {
    if (!b->find(var)) b->bind(var, value);
  }
  return replace_at(t, p, substitute(rule.to(), *b));
}

}  // namespace rwrl
