#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "coplan/mathprog.hpp"

namespace coplan::mp {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%+.17g", v);
  return buf;
}

std::string unsigned_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool is_token(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '#')) return false;
  }
  return s != "free" && s != "constant" && s != "inf";
}

std::vector<std::string> var_tokens(const Program& p) {
  std::vector<std::string> names;
  std::map<std::string, int> seen;
  for (const auto& v : p.vars()) seen[v.name]++;
  for (int j = 0; j < p.num_vars(); ++j) {
    const std::string& n = p.vars()[static_cast<std::size_t>(j)].name;
    names.push_back(is_token(n) && seen[n] == 1 ? n : "x" + std::to_string(j) + "_");
  }
  return names;
}

void write_linear(std::ostream& out, const std::vector<LinearTerm>& terms, const std::vector<std::string>& names) {
  for (const auto& t : terms) out << ' ' << num(t.coef) << ' ' << names[static_cast<std::size_t>(t.var.id)];
}

void write_squares(std::ostream& out, const std::vector<SquareTerm>& squares, const std::vector<std::string>& names) {
  if (squares.empty()) return;
  out << " [";
  for (const auto& s : squares) out << ' ' << num(s.weight) << ' ' << names[static_cast<std::size_t>(s.var.id)] << "^2";
  out << " ]";
}

const char* sense_token(RowSense s) {
  switch (s) {
    case RowSense::LessEqual: return "<=";
    case RowSense::GreaterEqual: return ">=";
    default: return "=";
  }
}

}  // namespace

void write_debug_text(const Program& p, std::ostream& out) {
  const auto names = var_tokens(p);
  out << (p.sense() == Sense::Minimize ? "Minimize" : "Maximize") << '\n';
  out << " obj:";
  write_linear(out, p.objective(), names);
  write_squares(out, p.objective_squares(), names);
  if (p.objective_constant() != 0.0) out << " constant " << num(p.objective_constant());
  out << '\n' << "Subject To\n";
  int i = 0;
  for (const auto& r : p.rows()) {
    out << " c" << i++ << ':';
    write_linear(out, r.terms, names);
    out << ' ' << sense_token(r.sense) << ' ' << num(r.rhs) << '\n';
  }
  i = 0;
  for (const auto& q : p.quad_rows()) {
    out << " q" << i++ << ':';
    write_squares(out, q.squares, names);
    write_linear(out, q.linear, names);
    out << " <= " << num(q.rhs) << '\n';
  }
  out << "Bounds\n";
  for (int j = 0; j < p.num_vars(); ++j) {
    const VarInfo& v = p.vars()[static_cast<std::size_t>(j)];
    const std::string& n = names[static_cast<std::size_t>(j)];
    if (v.kind == VarKind::Free && v.lower == -kInf && v.upper == kInf) {
      out << ' ' << n << " free\n";
    } else {
      out << ' ' << unsigned_num(v.lower) << " <= " << n << " <= " << unsigned_num(v.upper) << '\n';
    }
  }
  out << "Binaries\n";
  for (int j = 0; j < p.num_vars(); ++j) {
    if (p.vars()[static_cast<std::size_t>(j)].kind == VarKind::Binary) out << ' ' << names[static_cast<std::size_t>(j)] << '\n';
  }
  out << "End\n";
}

std::string to_debug_text(const Program& program) {
  std::ostringstream out;
  write_debug_text(program, out);
  return out.str();
}

namespace {

double parse_number(const std::string& tok) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw ModelError("debug text: expected a number, got '" + tok + "'");
  }
  if (used != tok.size()) throw ModelError("debug text: expected a number, got '" + tok + "'");
  return v;
}

struct Expression {
  std::vector<std::pair<std::string, double>> linear;
  std::vector<std::pair<std::string, double>> squares;
  double constant = 0.0;
};

// Parses tokens[pos..] until a sense token or the end.
Expression parse_expression(const std::vector<std::string>& toks, std::size_t& pos) {
  Expression e;
  while (pos < toks.size()) {
    const std::string& t = toks[pos];
    if (t == "<=" || t == ">=" || t == "=") break;
    if (t == "[") {
      ++pos;
      while (pos < toks.size() && toks[pos] != "]") {
        const double c = parse_number(toks[pos]);
        if (pos + 1 >= toks.size()) throw ModelError("debug text: truncated square term");
        std::string n = toks[pos + 1];
        if (n.size() < 3 || n.substr(n.size() - 2) != "^2") throw ModelError("debug text: bad square term '" + n + "'");
        e.squares.emplace_back(n.substr(0, n.size() - 2), c);
        pos += 2;
      }
      ++pos;
      continue;
    }
    if (t == "constant") {
      if (pos + 1 >= toks.size()) throw ModelError("debug text: missing constant");
      e.constant = parse_number(toks[pos + 1]);
      pos += 2;
      continue;
    }
    if (pos + 1 >= toks.size()) throw ModelError("debug text: dangling coefficient '" + t + "'");
    e.linear.emplace_back(toks[pos + 1], parse_number(t));
    pos += 2;
  }
  return e;
}

std::vector<std::string> split(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> toks;
  std::string t;
  while (in >> t) toks.push_back(t);
  return toks;
}

}  // namespace

Program parse_debug_text(std::istream& in) {
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);

  enum class Section { None, Objective, Rows, Bounds, Binaries };
  Sense sense = Sense::Minimize;
  std::vector<std::string> objective_line;
  std::vector<std::vector<std::string>> row_lines;
  std::vector<std::vector<std::string>> bound_lines;
  std::vector<std::string> binary_names;
  Section section = Section::None;
  for (const auto& line : lines) {
    const auto toks = split(line);
    if (toks.empty()) continue;
    if (toks[0] == "Minimize" || toks[0] == "Maximize") {
      sense = toks[0] == "Minimize" ? Sense::Minimize : Sense::Maximize;
      section = Section::Objective;
    } else if (line.find("Subject To") != std::string::npos) {
      section = Section::Rows;
    } else if (toks[0] == "Bounds") {
      section = Section::Bounds;
    } else if (toks[0] == "Binaries") {
      section = Section::Binaries;
    } else if (toks[0] == "End") {
      break;
    } else if (section == Section::Objective) {
      objective_line = toks;
    } else if (section == Section::Rows) {
      row_lines.push_back(toks);
    } else if (section == Section::Bounds) {
      bound_lines.push_back(toks);
    } else if (section == Section::Binaries) {
      binary_names.insert(binary_names.end(), toks.begin(), toks.end());
    }
  }

  Program p;
  p.sense_ = sense;
  std::map<std::string, int> index;
  for (const auto& b : bound_lines) {
    VarInfo v;
    if (b.size() == 2 && b[1] == "free") {
      v.kind = VarKind::Free;
      v.lower = -kInf;
      v.upper = kInf;
      v.name = b[0];
    } else if (b.size() == 5 && b[1] == "<=" && b[3] == "<=") {
      v.lower = parse_number(b[0]);
      v.upper = parse_number(b[4]);
      v.name = b[2];
      v.kind = v.lower == -kInf ? VarKind::Free : VarKind::Continuous;
    } else {
      throw ModelError("debug text: malformed bound line");
    }
    index[v.name] = static_cast<int>(p.vars_.size());
    p.vars_.push_back(v);
  }
  for (const auto& n : binary_names) {
    auto it = index.find(n);
    if (it == index.end()) throw ModelError("debug text: unknown binary '" + n + "'");
    p.vars_[static_cast<std::size_t>(it->second)].kind = VarKind::Binary;
  }
  auto ref = [&](const std::string& n) {
    auto it = index.find(n);
    if (it == index.end()) throw ModelError("debug text: unknown variable '" + n + "'");
    return VarRef{it->second};
  };

  if (!objective_line.empty()) {
    std::size_t pos = 1;
    const Expression e = parse_expression(objective_line, pos);
    for (const auto& [n, c] : e.linear) p.objective_.push_back({ref(n), c});
    for (const auto& [n, c] : e.squares) p.objective_squares_.push_back({ref(n), c});
    p.objective_constant_ = e.constant;
  }
  for (const auto& toks : row_lines) {
    if (toks.empty()) continue;
    const std::string& label = toks[0];
    std::size_t pos = 1;
    const Expression e = parse_expression(toks, pos);
    if (pos + 1 >= toks.size()) throw ModelError("debug text: row '" + label + "' lacks a right-hand side");
    const std::string& st = toks[pos];
    const double rhs = parse_number(toks[pos + 1]);
    if (!e.squares.empty()) {
      QuadConstraint q;
      q.name = label.substr(0, label.size() - 1);
      for (const auto& [n, c] : e.squares) q.squares.push_back({ref(n), c});
      for (const auto& [n, c] : e.linear) q.linear.push_back({ref(n), c});
      q.rhs = rhs;
      p.quad_rows_.push_back(std::move(q));
      continue;
    }
    LinearConstraint r;
    r.name = label.substr(0, label.size() - 1);
    for (const auto& [n, c] : e.linear) r.terms.push_back({ref(n), c});
    r.sense = st == "<=" ? RowSense::LessEqual : st == ">=" ? RowSense::GreaterEqual : RowSense::Equal;
    r.rhs = rhs;
    p.rows_.push_back(std::move(r));
  }
  return p;
}

}  // namespace coplan::mp
