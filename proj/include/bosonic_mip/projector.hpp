#pragma once

// Diagonal Fock-basis projectors: per-mode "exactly n", "any", or
// "at least one photon" conditions.

#include <string>
#include <vector>

#include "bosonic_mip/error.hpp"
#include "bosonic_mip/fock.hpp"

namespace bmip {

struct ModeCondition {
  enum class Kind { Any, Exactly, AtLeast };
  Kind kind = Kind::Any;
  int value = 0;

  static ModeCondition any() { return {Kind::Any, 0}; }
  static ModeCondition exactly(int n) { return {Kind::Exactly, n}; }
  static ModeCondition at_least(int n) { return {Kind::AtLeast, n}; }

  bool matches(int n) const {
    switch (kind) {
      case Kind::Any: return true;
      case Kind::Exactly: return n == value;
      case Kind::AtLeast: return n >= value;
    }
    return false;
  }
  bool operator==(const ModeCondition&) const = default;
};

/// Projector onto the basis states whose occupations satisfy every
/// per-mode condition. Text form: comma separated entries "3", "*" or "+"
/// (at least one), e.g. "0,7,*".
class FockProjector {
 public:
  FockProjector() = default;
  explicit FockProjector(std::vector<ModeCondition> conds, std::string label = {})
      : conds_(std::move(conds)), label_(std::move(label)) {
    if (label_.empty()) label_ = default_label();
  }

  static FockProjector basis(const std::vector<int>& occupation) {
    std::vector<ModeCondition> c;
    for (int n : occupation) c.push_back(ModeCondition::exactly(n));
    return FockProjector(std::move(c));
  }

  static FockProjector parse(const std::string& text) {
    std::vector<ModeCondition> c;
    std::string tok;
    auto flush = [&] {
      if (tok == "*") c.push_back(ModeCondition::any());
      else if (tok == "+") c.push_back(ModeCondition::at_least(1));
      else {
        try {
          std::size_t used = 0;
          const int v = std::stoi(tok, &used);
          if (used != tok.size() || v < 0) throw std::invalid_argument(tok);
          c.push_back(ModeCondition::exactly(v));
        } catch (const std::exception&) {
          throw InvalidArgument("FockProjector: bad pattern entry '" + tok + "' in '" + text + "'");
        }
      }
      tok.clear();
    };
    for (char ch : text) {
      if (ch == ',') flush();
      else if (ch != ' ' && ch != '|' && ch != '>' && ch != '<') tok += ch;
    }
    flush();
    return FockProjector(std::move(c));
  }

  const std::vector<ModeCondition>& conditions() const noexcept { return conds_; }
  const std::string& label() const noexcept { return label_; }
  std::size_t mode_count() const noexcept { return conds_.size(); }

  bool matches(const std::vector<int>& occupation) const {
    for (std::size_t i = 0; i < conds_.size(); ++i)
      if (!conds_[i].matches(occupation[i])) return false;
    return true;
  }

  /// Basis indices selected by this projector.
  std::vector<std::size_t> indices(const ModeSpace& space) const {
    if (conds_.size() != space.mode_count()) throw InvalidArgument("FockProjector: pattern " + label_ + " has wrong mode count");
    std::vector<std::size_t> out;
    std::vector<int> occ(space.mode_count(), 0);
    for (std::size_t i = 0; i < space.total_dimension(); ++i) {
      for (std::size_t m = 0; m < occ.size(); ++m) occ[m] = space.digit(i, m);
      if (matches(occ)) out.push_back(i);
    }
    return out;
  }

  std::string pattern_string() const {
    std::string s;
    for (std::size_t i = 0; i < conds_.size(); ++i) {
      if (i) s += ',';
      switch (conds_[i].kind) {
        case ModeCondition::Kind::Any: s += '*'; break;
        case ModeCondition::Kind::AtLeast: s += (conds_[i].value == 1 ? std::string("+") : ">=" + std::to_string(conds_[i].value)); break;
        case ModeCondition::Kind::Exactly: s += std::to_string(conds_[i].value); break;
      }
    }
    return s;
  }

 private:
  std::string default_label() const { return "|" + pattern_string() + ">"; }

  std::vector<ModeCondition> conds_;
  std::string label_;
};

}  // namespace bmip
