#pragma once

// Boolean/proximity keyword queries: AST, parser, canonical printer and matcher.
//
// Grammar (operators are case-sensitive uppercase, NEAR binds tightest):
//   query = or ;  or = and { "OR" and } ;  and = not { "AND" not } ;
//   not   = [ "NOT" ] near ;  near = prim { "NEAR/" INT prim } ;
//   prim  = TERM | PHRASE | "(" query ")" ;
//   TERM  = word [ "*" ] ;  PHRASE = '"' word [ "*" ] { " " word [ "*" ] } '"' ;
//
// A NEAR operand must be position-bearing: a term, a phrase, or an OR over
// position-bearing nodes. A phrase's position is the index of its first token.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <unicode/uchar.h>

#include "sdglab/detail/unicode.hpp"
#include "sdglab/error.hpp"

namespace sdgl {

enum class NodeKind { Term, Phrase, Or, And, Not, Near };

/// A keyword; `wildcard` makes it match any token it prefixes.
struct Word {
  std::string text;
  bool wildcard = false;

  bool matches(std::string_view token) const noexcept {
    return wildcard ? token.starts_with(text) : token == text;
  }
  bool operator==(const Word&) const = default;
};

class Query {
 public:
  static Query term(std::string_view word, bool wildcard = false) {
    Query q(NodeKind::Term);
    q.words_.push_back(make_word(word, wildcard));
    return q;
  }

  static Query phrase(std::vector<Word> words) {
    if (words.empty()) throw Error(ErrorCode::Syntax, "phrase must contain at least one word");
    Query q(NodeKind::Phrase);
    for (auto& w : words) q.words_.push_back(make_word(w.text, w.wildcard));
    return q;
  }

  static Query any_of(std::vector<Query> children) { return group(NodeKind::Or, std::move(children)); }
  static Query all_of(std::vector<Query> children) { return group(NodeKind::And, std::move(children)); }

  static Query negate(Query child) {
    Query q(NodeKind::Not);
    q.children_.push_back(std::move(child));
    return q;
  }

  static Query near(Query left, Query right, std::uint32_t window) {
    if (!left.position_bearing() || !right.position_bearing()) {
      throw Error(ErrorCode::NearOperand,
                  "NEAR operands must be terms, phrases or OR-groups of them");
    }
    Query q(NodeKind::Near);
    q.window_ = window;
    q.children_.push_back(std::move(left));
    q.children_.push_back(std::move(right));
    return q;
  }

  NodeKind kind() const noexcept { return kind_; }
  /// Term: exactly one word. Phrase: the words in order. Otherwise empty.
  const std::vector<Word>& words() const noexcept { return words_; }
  const std::vector<Query>& children() const noexcept { return children_; }
  std::uint32_t window() const noexcept { return window_; }

  bool is_literal() const noexcept { return kind_ == NodeKind::Term || kind_ == NodeKind::Phrase; }

  bool position_bearing() const noexcept {
    if (is_literal()) return true;
    if (kind_ != NodeKind::Or) return false;
    return std::all_of(children_.begin(), children_.end(),
                       [](const Query& c) { return c.position_bearing(); });
  }

  bool operator==(const Query&) const = default;

 private:
  explicit Query(NodeKind kind) : kind_(kind) {}

  static Word make_word(std::string_view text, bool wildcard) {
    if (text.empty()) throw Error(ErrorCode::Syntax, "empty keyword");
    return Word{detail::fold_word(text), wildcard};
  }

  static Query group(NodeKind kind, std::vector<Query> children) {
    if (children.size() < 2) {
      throw Error(ErrorCode::Syntax, "OR/AND need at least two operands");
    }
    Query q(kind);
    q.children_ = std::move(children);
    return q;
  }

  NodeKind kind_;
  std::vector<Word> words_;
  std::vector<Query> children_;
  std::uint32_t window_ = 0;
};

// ---------------------------------------------------------------------------
// Printing

namespace detail {

inline void print_word(std::string& out, const Word& w) {
  out += w.text;
  if (w.wildcard) out += '*';
}

inline void print_query(std::string& out, const Query& q);

inline void print_child(std::string& out, const Query& child, bool parenthesize) {
  if (parenthesize) out += '(';
  print_query(out, child);
  if (parenthesize) out += ')';
}

inline void print_query(std::string& out, const Query& q) {
  switch (q.kind()) {
    case NodeKind::Term:
      print_word(out, q.words().front());
      break;
    case NodeKind::Phrase:
      out += '"';
      for (std::size_t i = 0; i < q.words().size(); ++i) {
        if (i) out += ' ';
        print_word(out, q.words()[i]);
      }
      out += '"';
      break;
    case NodeKind::Or:
    case NodeKind::And: {
      const bool is_or = q.kind() == NodeKind::Or;
      for (std::size_t i = 0; i < q.children().size(); ++i) {
        if (i) out += is_or ? " OR " : " AND ";
        const auto ck = q.children()[i].kind();
        print_child(out, q.children()[i], ck == NodeKind::Or || (!is_or && ck == NodeKind::And));
      }
      break;
    }
    case NodeKind::Not: {
      out += "NOT ";
      const auto ck = q.children().front().kind();
      print_child(out, q.children().front(),
                  ck == NodeKind::Or || ck == NodeKind::And || ck == NodeKind::Not);
      break;
    }
    case NodeKind::Near:
      print_child(out, q.children()[0], !q.children()[0].is_literal());
      out += " NEAR/" + std::to_string(q.window()) + " ";
      print_child(out, q.children()[1], !q.children()[1].is_literal());
      break;
  }
}

}  // namespace detail

/// Canonical text form; parse_query(to_string(q)) == q.
inline std::string to_string(const Query& q) {
  std::string out;
  detail::print_query(out, q);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

enum class TokKind { Word, Phrase, LParen, RParen, Or, And, Not, Near, End };

struct QueryToken {
  TokKind kind;
  std::size_t offset;
  std::vector<Word> words;  // Word: one entry; Phrase: all entries
  std::uint32_t window = 0;
};

inline bool is_space(char32_t cp) noexcept {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' ||
         (cp >= 0x80 && u_isUWhiteSpace(static_cast<UChar32>(cp)));
}

class QueryLexer {
 public:
  explicit QueryLexer(std::string_view text) : text_(text) {}

  std::vector<QueryToken> run() {
    std::vector<QueryToken> out;
    while (true) {
      skip_space();
      if (pos_ >= text_.size()) {
        out.push_back({TokKind::End, pos_, {}});
        return out;
      }
      const std::size_t start = pos_;
      const char c = text_[pos_];
      if (c == '(') {
        ++pos_;
        out.push_back({TokKind::LParen, start, {}});
      } else if (c == ')') {
        ++pos_;
        out.push_back({TokKind::RParen, start, {}});
      } else if (c == '"') {
        out.push_back(lex_phrase());
      } else {
        out.push_back(lex_word_or_operator());
      }
    }
  }

 private:
  void skip_space() {
    while (pos_ < text_.size()) {
      const auto cp = decode_utf8(text_, pos_);
      if (!is_space(cp.value)) break;
      pos_ += cp.length;
    }
  }

  std::string_view scan_word() {
    const std::size_t start = pos_;
    while (pos_ < text_.size()) {
      const auto cp = decode_utf8(text_, pos_);
      if (!is_word_char(cp.value)) break;
      pos_ += cp.length;
    }
    return text_.substr(start, pos_ - start);
  }

  bool take(char c) {
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  QueryToken lex_word_or_operator() {
    const std::size_t start = pos_;
    const auto raw = scan_word();
    if (raw.empty()) throw SyntaxError(start, "unexpected character");
    if (raw == "OR") return {TokKind::Or, start, {}};
    if (raw == "AND") return {TokKind::And, start, {}};
    if (raw == "NOT") return {TokKind::Not, start, {}};
    if (raw == "NEAR") {
      if (!take('/')) throw SyntaxError(start, "NEAR requires an integer window, e.g. NEAR/3");
      const std::size_t digits_start = pos_;
      std::uint64_t window = 0;
      while (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9') {
        window = window * 10 + static_cast<std::uint64_t>(text_[pos_] - '0');
        if (window > UINT32_MAX) throw SyntaxError(digits_start, "NEAR window too large");
        ++pos_;
      }
      if (pos_ == digits_start) throw SyntaxError(start, "NEAR requires an integer window, e.g. NEAR/3");
      if (pos_ < text_.size() && is_word_char(decode_utf8(text_, pos_).value)) {
        throw SyntaxError(pos_, "NEAR window must be an integer");
      }
      QueryToken t{TokKind::Near, start, {}};
      t.window = static_cast<std::uint32_t>(window);
      return t;
    }
    const bool wildcard = take('*');
    return {TokKind::Word, start, {Word{fold_word(raw), wildcard}}};
  }

  QueryToken lex_phrase() {
    const std::size_t start = pos_;
    ++pos_;  // opening quote
    QueryToken t{TokKind::Phrase, start, {}};
    while (true) {
      skip_space();
      if (pos_ >= text_.size()) throw SyntaxError(start, "unterminated phrase");
      if (take('"')) break;
      const std::size_t word_start = pos_;
      const auto raw = scan_word();
      if (raw.empty()) throw SyntaxError(word_start, "unexpected character in phrase");
      const bool wildcard = take('*');
      t.words.push_back(Word{fold_word(raw), wildcard});
    }
    if (t.words.empty()) throw SyntaxError(start, "empty phrase");
    return t;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

class QueryParser {
 public:
  explicit QueryParser(std::vector<QueryToken> tokens) : toks_(std::move(tokens)) {}

  Query parse() {
    Query q = parse_or();
    if (peek().kind != TokKind::End) {
      throw SyntaxError(peek().offset, peek().kind == TokKind::RParen ? "unbalanced ')'"
                                                                      : "unexpected token");
    }
    return q;
  }

 private:
  const QueryToken& peek() const { return toks_[pos_]; }
  const QueryToken& next() { return toks_[pos_++]; }

  Query parse_or() {
    std::vector<Query> parts;
    parts.push_back(parse_and());
    while (peek().kind == TokKind::Or) {
      ++pos_;
      parts.push_back(parse_and());
    }
    return parts.size() == 1 ? std::move(parts.front()) : Query::any_of(std::move(parts));
  }

  Query parse_and() {
    std::vector<Query> parts;
    parts.push_back(parse_not());
    while (peek().kind == TokKind::And) {
      ++pos_;
      parts.push_back(parse_not());
    }
    return parts.size() == 1 ? std::move(parts.front()) : Query::all_of(std::move(parts));
  }

  Query parse_not() {
    if (peek().kind == TokKind::Not) {
      ++pos_;
      return Query::negate(parse_near());
    }
    return parse_near();
  }

  Query parse_near() {
    Query left = parse_prim();
    while (peek().kind == TokKind::Near) {
      const auto& op = next();
      Query right = parse_prim();
      if (!left.position_bearing() || !right.position_bearing()) {
        throw Error(ErrorCode::NearOperand,
                    "at offset " + std::to_string(op.offset) +
                        ": NEAR operands must be terms, phrases or OR-groups of them");
      }
      left = Query::near(std::move(left), std::move(right), op.window);
    }
    return left;
  }

  Query parse_prim() {
    const auto& t = next();
    switch (t.kind) {
      case TokKind::Word:
        return Query::term(t.words.front().text, t.words.front().wildcard);
      case TokKind::Phrase:
        return Query::phrase(t.words);
      case TokKind::LParen: {
        Query inner = parse_or();
        if (peek().kind != TokKind::RParen) throw SyntaxError(t.offset, "unbalanced '('");
        ++pos_;
        return inner;
      }
      case TokKind::End:
        throw SyntaxError(t.offset, "unexpected end of query (dangling operator?)");
      default:
        throw SyntaxError(t.offset, "expected a term, phrase or '('");
    }
  }

  std::vector<QueryToken> toks_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses the query dialect described at the top of this header.
/// Throws SyntaxError (E_SYNTAX) or Error(E_NEAR_OPERAND).
inline Query parse_query(std::string_view text) {
  return detail::QueryParser(detail::QueryLexer(text).run()).parse();
}

// ---------------------------------------------------------------------------
// Matching

using Positions = std::vector<std::size_t>;

/// Sorted (token, position) pairs over one document so literals resolve by
/// binary search instead of a scan. Non-owning: `tokens` must outlive it.
class TokenIndex {
 public:
  explicit TokenIndex(std::span<const std::string> tokens) : tokens_(tokens) {
    entries_.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) entries_.emplace_back(tokens[i], i);
    std::sort(entries_.begin(), entries_.end());
  }

  std::span<const std::string> tokens() const noexcept { return tokens_; }

  /// Sorted positions of tokens matched by `w`.
  Positions positions_of(const Word& w) const {
    Positions out;
    auto lo = std::lower_bound(entries_.begin(), entries_.end(), Entry{w.text, 0});
    for (auto it = lo; it != entries_.end() && w.matches(it->first); ++it) {
      out.push_back(it->second);
    }
    if (w.wildcard) std::sort(out.begin(), out.end());
    return out;
  }

 private:
  using Entry = std::pair<std::string_view, std::size_t>;
  std::span<const std::string> tokens_;
  std::vector<Entry> entries_;
};

/// One positive literal that contributed to a match.
struct TermHit {
  std::string pattern;  // canonical literal text, e.g. `polic*` or `"climate change"`
  Positions positions;  // sorted token indices (phrase: start index)
  bool operator==(const TermHit&) const = default;
};

struct MatchResult {
  bool matched = false;
  std::vector<TermHit> matched_terms;
};

namespace detail {

inline Positions literal_positions(const Query& q, const TokenIndex& index) {
  const auto& words = q.words();
  Positions first = index.positions_of(words.front());
  if (q.kind() == NodeKind::Term || words.size() == 1) return first;
  const auto tokens = index.tokens();
  Positions out;
  for (std::size_t start : first) {
    if (start + words.size() > tokens.size()) break;
    bool ok = true;
    for (std::size_t k = 1; k < words.size() && ok; ++k) ok = words[k].matches(tokens[start + k]);
    if (ok) out.push_back(start);
  }
  return out;
}

inline Positions positions(const Query& q, const TokenIndex& index) {
  if (q.is_literal()) return literal_positions(q, index);
  if (q.kind() != NodeKind::Or || !q.position_bearing()) {
    throw Error(ErrorCode::NearOperand, "positions are defined only for terms, phrases and OR-groups of them");
  }
  Positions out;
  for (const auto& c : q.children()) {
    Positions p = positions(c, index);
    Positions merged;
    merged.reserve(out.size() + p.size());
    std::set_union(out.begin(), out.end(), p.begin(), p.end(), std::back_inserter(merged));
    out = std::move(merged);
  }
  return out;
}

/// Elements of `from` within `window` of some element of `other` (both sorted).
inline Positions within_window(const Positions& from, const Positions& other, std::uint32_t window) {
  Positions out;
  for (std::size_t p : from) {
    const std::size_t lo = p >= window ? p - window : 0;
    auto it = std::lower_bound(other.begin(), other.end(), lo);
    if (it != other.end() && *it <= p + static_cast<std::size_t>(window)) out.push_back(p);
  }
  return out;
}

inline bool evaluate(const Query& q, const TokenIndex& index) {
  switch (q.kind()) {
    case NodeKind::Term:
    case NodeKind::Phrase:
      return !literal_positions(q, index).empty();
    case NodeKind::Or:
      return std::any_of(q.children().begin(), q.children().end(),
                         [&](const Query& c) { return evaluate(c, index); });
    case NodeKind::And:
      return std::all_of(q.children().begin(), q.children().end(),
                         [&](const Query& c) { return evaluate(c, index); });
    case NodeKind::Not:
      return !evaluate(q.children().front(), index);
    case NodeKind::Near: {
      const Positions left = positions(q.children()[0], index);
      if (left.empty()) return false;
      const Positions right = positions(q.children()[1], index);
      return !within_window(left, right, q.window()).empty();
    }
  }
  return false;
}

inline void add_hit(std::vector<TermHit>& hits, std::string pattern, const Positions& p) {
  if (p.empty()) return;
  for (auto& h : hits) {
    if (h.pattern == pattern) {
      Positions merged;
      std::set_union(h.positions.begin(), h.positions.end(), p.begin(), p.end(),
                     std::back_inserter(merged));
      h.positions = std::move(merged);
      return;
    }
  }
  hits.push_back({std::move(pattern), p});
}

// Called only on nodes that matched. `allowed` restricts literal positions to
// those that took part in an enclosing NEAR pair.
inline void collect(const Query& q, const TokenIndex& index, const Positions* allowed,
                    std::vector<TermHit>& hits) {
  switch (q.kind()) {
    case NodeKind::Term:
    case NodeKind::Phrase: {
      Positions p = literal_positions(q, index);
      if (allowed) {
        Positions kept;
        std::set_intersection(p.begin(), p.end(), allowed->begin(), allowed->end(),
                              std::back_inserter(kept));
        p = std::move(kept);
      }
      add_hit(hits, to_string(q), p);
      break;
    }
    case NodeKind::Or:
      for (const auto& c : q.children()) {
        if (evaluate(c, index)) collect(c, index, allowed, hits);
      }
      break;
    case NodeKind::And:
      for (const auto& c : q.children()) collect(c, index, nullptr, hits);
      break;
    case NodeKind::Not:
      break;
    case NodeKind::Near: {
      const Positions left = positions(q.children()[0], index);
      const Positions right = positions(q.children()[1], index);
      const Positions qleft = within_window(left, right, q.window());
      const Positions qright = within_window(right, left, q.window());
      collect(q.children()[0], index, &qleft, hits);
      collect(q.children()[1], index, &qright, hits);
      break;
    }
  }
}

}  // namespace detail

/// Positions of a position-bearing query: term hits, phrase start indices, or
/// the union over an OR. Throws E_NEAR_OPERAND for AND/NOT/NEAR.
inline Positions match_positions(const Query& q, const TokenIndex& index) {
  return detail::positions(q, index);
}
inline Positions match_positions(const Query& q, std::span<const std::string> tokens) {
  return match_positions(q, TokenIndex(tokens));
}

/// Evaluates `q` against a tokenized document. On a match, reports every
/// positive literal (not under NOT) that contributed, with all its positions;
/// literals under NEAR report only positions that formed a qualifying pair.
inline MatchResult match_query(const Query& q, const TokenIndex& index) {
  MatchResult r;
  r.matched = detail::evaluate(q, index);
  if (r.matched) detail::collect(q, index, nullptr, r.matched_terms);
  return r;
}
inline MatchResult match_query(const Query& q, std::span<const std::string> tokens) {
  return match_query(q, TokenIndex(tokens));
}

}  // namespace sdgl
