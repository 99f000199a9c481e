#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <locale>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dime/error.hpp"

namespace dime {

using Address = std::uint64_t;
// Virtual time units. Signed so that transient budget deficits are representable.
using Time = std::int64_t;

enum class Opcode : std::uint8_t { compute, jmp, br, ndbr, call, ret, halt };

inline std::string_view opcode_name(Opcode op) {
  switch (op) {
    case Opcode::compute: return "op";
    case Opcode::jmp: return "jmp";
    case Opcode::br: return "br";
    case Opcode::ndbr: return "ndbr";
    case Opcode::call: return "call";
    case Opcode::ret: return "ret";
    case Opcode::halt: return "halt";
  }
  return "?";
}

// Transfers that end a trace: only the last instruction of a trace may be one.
inline bool is_unconditional_transfer(Opcode op) {
  return op == Opcode::jmp || op == Opcode::call || op == Opcode::ret || op == Opcode::halt;
}

inline bool is_conditional(Opcode op) { return op == Opcode::br || op == Opcode::ndbr; }

// Instructions that may move control somewhere other than addr + 1.
inline bool is_control_transfer(Opcode op) {
  return is_conditional(op) || op == Opcode::jmp || op == Opcode::call || op == Opcode::ret;
}

struct Instruction {
  Address addr = 0;
  Opcode op = Opcode::compute;
  Time cost = 1;
  // Resolved absolute target of jmp/br/ndbr/call.
  Address target = 0;
  // Cyclic taken/not-taken pattern of a br, e.g. "NNT".
  std::string pattern;
  // Taken probability of an ndbr.
  double probability = 0.0;

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

struct ProgramImage {
  std::string name;
  Address base = 0;
  std::vector<Instruction> instructions;

  Address end() const { return base + instructions.size(); }
  bool contains(Address a) const { return a >= base && a < end(); }

  friend bool operator==(const ProgramImage&, const ProgramImage&) = default;
};

struct Resolved {
  const Instruction* instruction = nullptr;
  const ProgramImage* image = nullptr;
  Address relative = 0;
};

// A loaded guest program. Immutable after construction; execution starts at
// the first instruction of the first image.
class Program {
 public:
  Program() = default;
  explicit Program(std::vector<ProgramImage> images) : images_(std::move(images)) {
    validate();
  }

  const std::vector<ProgramImage>& images() const { return images_; }
  Address entry() const { return images_.front().base; }

  const ProgramImage* find_image(Address addr) const {
    // images_ are kept sorted by base
    auto it = std::upper_bound(images_.begin(), images_.end(), addr,
                               [](Address a, const ProgramImage& img) { return a < img.base; });
    if (it == images_.begin()) return nullptr;
    --it;
    return it->contains(addr) ? &*it : nullptr;
  }

  const ProgramImage* find_image(std::string_view name) const {
    for (const auto& img : images_)
      if (img.name == name) return &img;
    return nullptr;
  }

  Resolved resolve(Address addr) const {
    const ProgramImage* img = find_image(addr);
    if (img == nullptr)
      throw AddressError("address " + std::to_string(addr) + " is outside every image");
    return {&img->instructions[addr - img->base], img, addr - img->base};
  }

  const Instruction& at(Address addr) const { return *resolve(addr).instruction; }

  std::size_t instruction_count() const {
    std::size_t n = 0;
    for (const auto& img : images_) n += img.instructions.size();
    return n;
  }

  friend bool operator==(const Program& a, const Program& b) { return a.images_ == b.images_; }

 private:
  void validate() {
    if (images_.empty()) throw ProgramError(0, "no images");
    std::stable_sort(images_.begin(), images_.end(),
                     [](const ProgramImage& a, const ProgramImage& b) { return a.base < b.base; });
    for (std::size_t i = 0; i < images_.size(); ++i) {
      const auto& img = images_[i];
      if (img.instructions.empty()) throw ProgramError(0, "image '" + img.name + "' is empty");
      if (i > 0 && images_[i - 1].end() > img.base) throw ProgramError(0, "overlapping images");
      for (std::size_t k = 0; k < img.instructions.size(); ++k)
        if (img.instructions[k].addr != img.base + k)
          throw ProgramError(0, "instruction addresses of image '" + img.name + "' are not contiguous");
      for (std::size_t j = 0; j < i; ++j)
        if (images_[j].name == img.name) throw ProgramError(0, "duplicate image '" + img.name + "'");
    }
    for (const auto& img : images_) {
      for (const auto& ins : img.instructions) {
        bool has_target = ins.op == Opcode::jmp || is_conditional(ins.op) || ins.op == Opcode::call;
        if (has_target && find_image(ins.target) == nullptr)
          throw ProgramError(0, "target " + std::to_string(ins.target) + " of instruction at " +
                                    std::to_string(ins.addr) + " does not resolve");
        if (ins.op == Opcode::ndbr && !(ins.probability >= 0.0 && ins.probability <= 1.0))
          throw ProgramError(0, "ndbr probability out of [0,1]");
        if (ins.op == Opcode::br && ins.pattern.empty())
          throw ProgramError(0, "br with empty pattern");
        if (ins.cost < 0) throw ProgramError(0, "negative cost");
      }
    }
  }

  std::vector<ProgramImage> images_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const char* ws = " \t\r";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto head = static_cast<unsigned char>(s[0]);
  if (!(std::isalpha(head) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || c == '_' || c == '.' || c == '-';
  });
}

template <typename Int>
std::optional<Int> parse_uint(std::string_view s) {
  if (s.empty() || s[0] == '-' || s[0] == '+') return std::nullopt;
  Int v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<double> parse_probability(std::string_view s) {
  std::string tmp(s);
  std::istringstream in(tmp);
  in.imbue(std::locale::classic());
  double v = 0;
  if (!(in >> v) || !in.eof()) return std::nullopt;
  return v;
}

}  // namespace detail

// Parses the line-oriented program format:
//
//   image <name> <base>
//   [<label>:] op <cost> | jmp <label> | br <label> <pattern> |
//              ndbr <label> <p> | call <label> | ret | halt
//
// Comments start with ';'. Labels are global across images.
inline Program parse_program(std::string_view text) {
  struct Pending {
    std::size_t image;
    std::size_t index;
    std::string label;
    std::size_t line;
  };
  std::vector<ProgramImage> images;
  std::map<std::string, Address, std::less<>> labels;
  std::vector<Pending> pending;
  std::vector<std::pair<std::string, std::size_t>> open_labels;  // waiting for an instruction

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    if (auto semi = raw.find(';'); semi != std::string_view::npos) raw = raw.substr(0, semi);
    std::string_view line = detail::trim(raw);
    if (line.empty()) continue;

    // Leading "<label>:" prefixes.
    while (true) {
      auto colon = line.find(':');
      if (colon == std::string_view::npos) break;
      auto first_ws = line.find_first_of(" \t");
      if (first_ws != std::string_view::npos && first_ws < colon) break;
      std::string_view label = line.substr(0, colon);
      if (!detail::is_identifier(label)) throw ProgramError(line_no, "bad label '" + std::string(label) + "'");
      if (images.empty()) throw ProgramError(line_no, "label before first image");
      open_labels.emplace_back(std::string(label), line_no);
      line = detail::trim(line.substr(colon + 1));
    }
    if (line.empty()) continue;

    auto tok = detail::split_ws(line);
    std::string_view mnemonic = tok[0];
    auto expect_args = [&](std::size_t n) {
      if (tok.size() != n + 1)
        throw ProgramError(line_no, "'" + std::string(mnemonic) + "' expects " + std::to_string(n) +
                                        " operand" + (n == 1 ? "" : "s"));
    };

    if (mnemonic == "image") {
      expect_args(2);
      if (!open_labels.empty()) throw ProgramError(line_no, "label not followed by an instruction");
      if (!detail::is_identifier(tok[1])) throw ProgramError(line_no, "bad image name");
      auto base = detail::parse_uint<Address>(tok[2]);
      if (!base) throw ProgramError(line_no, "bad image base '" + std::string(tok[2]) + "'");
      images.push_back({std::string(tok[1]), *base, {}});
      continue;
    }
    if (images.empty()) throw ProgramError(line_no, "instruction before first image");

    auto& img = images.back();
    Instruction ins;
    ins.addr = img.base + img.instructions.size();
    std::optional<std::string> target_label;

    if (mnemonic == "op") {
      expect_args(1);
      auto cost = detail::parse_uint<Time>(tok[1]);
      if (!cost) throw ProgramError(line_no, "bad cost '" + std::string(tok[1]) + "'");
      ins.op = Opcode::compute;
      ins.cost = *cost;
    } else if (mnemonic == "jmp" || mnemonic == "call") {
      expect_args(1);
      ins.op = mnemonic == "jmp" ? Opcode::jmp : Opcode::call;
      target_label = std::string(tok[1]);
    } else if (mnemonic == "br") {
      expect_args(2);
      ins.op = Opcode::br;
      target_label = std::string(tok[1]);
      ins.pattern = std::string(tok[2]);
      if (ins.pattern.find_first_not_of("TN") != std::string::npos)
        throw ProgramError(line_no, "br pattern must consist of T and N");
    } else if (mnemonic == "ndbr") {
      expect_args(2);
      ins.op = Opcode::ndbr;
      target_label = std::string(tok[1]);
      auto p = detail::parse_probability(tok[2]);
      if (!p || *p < 0.0 || *p > 1.0) throw ProgramError(line_no, "ndbr probability must be in [0,1]");
      ins.probability = *p;
    } else if (mnemonic == "ret" || mnemonic == "halt") {
      expect_args(0);
      ins.op = mnemonic == "ret" ? Opcode::ret : Opcode::halt;
    } else {
      throw ProgramError(line_no, "unknown mnemonic '" + std::string(mnemonic) + "'");
    }

    for (auto& [label, lno] : open_labels) {
      if (!labels.emplace(label, ins.addr).second)
        throw ProgramError(lno, "duplicate label '" + label + "'");
    }
    open_labels.clear();
    if (target_label) {
      if (!detail::is_identifier(*target_label)) throw ProgramError(line_no, "bad label '" + *target_label + "'");
      pending.push_back({images.size() - 1, img.instructions.size(), *target_label, line_no});
    }
    img.instructions.push_back(std::move(ins));
  }

  if (!open_labels.empty()) throw ProgramError(open_labels.front().second, "label not followed by an instruction");
  if (images.empty()) throw ProgramError(0, "no images");
  for (const auto& p : pending) {
    auto it = labels.find(p.label);
    if (it == labels.end()) throw ProgramError(p.line, "unresolved label '" + p.label + "'");
    images[p.image].instructions[p.index].target = it->second;
  }
  for (const auto& img : images)
    if (img.instructions.empty()) throw ProgramError(0, "image '" + img.name + "' has no instructions");
  return Program(std::move(images));
}

// Writes a program back in the textual format. Labels are regenerated as
// "a<address>" for every branch target.
inline std::string serialize_program(const Program& program) {
  std::map<Address, bool> targets;
  for (const auto& img : program.images())
    for (const auto& ins : img.instructions)
      if (ins.op == Opcode::jmp || ins.op == Opcode::call || is_conditional(ins.op)) targets[ins.target] = true;

  std::ostringstream out;
  out.imbue(std::locale::classic());
  out.precision(17);
  for (const auto& img : program.images()) {
    out << "image " << img.name << ' ' << img.base << '\n';
    for (const auto& ins : img.instructions) {
      if (targets.count(ins.addr)) out << 'a' << ins.addr << ": ";
      else out << "    ";
      switch (ins.op) {
        case Opcode::compute: out << "op " << ins.cost; break;
        case Opcode::jmp: out << "jmp a" << ins.target; break;
        case Opcode::call: out << "call a" << ins.target; break;
        case Opcode::br: out << "br a" << ins.target << ' ' << ins.pattern; break;
        case Opcode::ndbr: out << "ndbr a" << ins.target << ' ' << ins.probability; break;
        case Opcode::ret: out << "ret"; break;
        case Opcode::halt: out << "halt"; break;
      }
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace dime
