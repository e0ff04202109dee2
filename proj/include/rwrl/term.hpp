#pragma once
// Terms, s-expression syntax, first-order matching and positional rewriting.
//
// Terms are immutable and structurally shared: rewriting returns a new term
// that reuses every untouched subtree of the input.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rwrl {

enum class SymbolKind {
  kOperator,
  kConstant,
  kBoundVariable,  // pattern variable, spelled ?name
  kFreshVariable,  // proof-introduced variable, spelled v<digits>
};

struct SymbolInfo {
  std::string name;
  int arity;
  SymbolKind kind;
  std::uint32_t id;
};

// Interned, process-wide symbol handle. Pointer identity is symbol identity.
using Symbol = const SymbolInfo*;

// Returns the interned symbol, creating it on first use. Throws
// std::invalid_argument if the name was interned with another arity/kind.
Symbol intern_symbol(std::string_view name, int arity, SymbolKind kind);
Symbol pattern_variable(std::string_view name);  // name without '?'
Symbol fresh_variable(int index);                 // v<index>
// Index of a fresh variable symbol, or -1.
int fresh_variable_index(Symbol s);

class Term {
 public:
  Term(Symbol symbol, std::vector<Term> children = {});

  Symbol symbol() const { return node_->symbol; }
  const std::vector<Term>& children() const { return node_->children; }
  const Term& child(std::size_t i) const { return node_->children[i]; }
  std::size_t arity() const { return node_->children.size(); }
  bool is_leaf() const { return node_->children.empty(); }
  std::size_t hash() const { return node_->hash; }
  std::size_t size() const { return node_->size; }
  int depth() const { return node_->depth; }

  bool operator==(const Term& other) const;
  bool operator!=(const Term& other) const { return !(*this == other); }
  // True when both handles share the same node.
  bool same_node(const Term& other) const { return node_ == other.node_; }

 private:
  struct Node {
    Symbol symbol;
    std::vector<Term> children;
    std::size_t hash;
    std::size_t size;
    int depth;
  };
  std::shared_ptr<const Node> node_;
};

struct TermHash {
  std::size_t operator()(const Term& t) const { return t.hash(); }
};

using Path = std::vector<int>;

class Signature {
 public:
  Signature(std::string name, std::vector<Symbol> symbols,
            bool allows_fresh_variables,
            std::vector<std::pair<std::string, std::string>> aliases = {});

  const std::string& name() const { return name_; }
  const std::vector<Symbol>& symbols() const { return symbols_; }
  bool allows_fresh_variables() const { return fresh_; }
  bool contains(Symbol s) const;
  // Resolves a spelled name (after alias substitution); nullptr if unknown.
  Symbol find(std::string_view name) const;

 private:
  std::string name_;
  std::vector<Symbol> symbols_;
  bool fresh_;
  std::vector<std::pair<std::string, std::string>> aliases_;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what + " at position " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class InvalidPath : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

struct ParseOptions {
  bool allow_pattern_variables = false;
};

Term parse_term(std::string_view text, const Signature& signature,
                ParseOptions options = {});
std::string print_term(const Term& t);
std::string print_path(const Path& p);

bool is_valid_path(const Term& t, const Path& p);
const Term& subterm_at(const Term& t, const Path& p);
// Returns t with the subterm at p replaced; shares all other nodes.
Term replace_at(const Term& t, const Path& p, Term replacement);
// Pre-order list of every valid path in t (root first).
std::vector<Path> all_paths(const Term& t);
bool contains_symbol(const Term& t, Symbol s);
// Pattern variables occurring in t, in first-occurrence order.
std::vector<Symbol> bound_variables(const Term& t);
// Largest fresh-variable index in t, or -1.
int max_fresh_index(const Term& t);

class Bindings {
 public:
  const Term* find(Symbol var) const;
  void bind(Symbol var, Term value);
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<std::pair<Symbol, Term>>& entries() const {
    return entries_;
  }

 private:
  std::vector<std::pair<Symbol, Term>> entries_;
};

// First-order one-sided matching. Repeated pattern variables must bind equal
// subterms; all non-variable symbols must coincide.
std::optional<Bindings> match(const Term& pattern, const Term& t);
// Throws std::invalid_argument when a pattern variable is unbound.
Term substitute(const Term& pattern, const Bindings& bindings);

enum class Direction { kForward, kBackward };

// An equation used in one direction. `from` is matched, `to` is produced.
struct RewriteRule {
  std::string id;
  Term lhs;
  Term rhs;
  Direction direction = Direction::kForward;

  const Term& from() const {
    return direction == Direction::kForward ? lhs : rhs;
  }
  const Term& to() const {
    return direction == Direction::kForward ? rhs : lhs;
  }
  RewriteRule reversed() const;
  // Pattern variables of to() that do not occur in from(). A rule with extra
  // variables needs them supplied explicitly when applied.
  std::vector<Symbol> extra_variables() const;
  // No extra variables: applicable without inventing terms.
  bool admissible() const { return extra_variables().empty(); }
  std::string label() const;
};

// Applies rule at p. `extra` must bind every extra variable of the rule.
// Returns nullopt when from() does not match the subterm at p. Throws
// InvalidPath for an invalid p and std::invalid_argument for a missing
// extra binding.
std::optional<Term> rewrite_at(const Term& t, const Path& p,
                               const RewriteRule& rule,
                               const Bindings& extra = {});

}  // namespace rwrl
