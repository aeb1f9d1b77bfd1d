#include "numerics/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "common/error.hpp"
#include "common/text.hpp"

namespace prectr::num {

const ParamTensor& Checkpoint::find(const std::string& name) const {
  for (const auto& p : params) {
    if (p.name == name) return p;
  }
  fail(ErrorKind::Lookup, "checkpoint has no parameter '" + name + "'");
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out = std::string(kCheckpointHeader) + "\n";
  for (const auto& [k, v] : ckpt.meta) {
    require(k.find_first_of(" \n") == std::string::npos && v.find('\n') == std::string::npos,
            ErrorKind::Validation, "checkpoint meta keys may not contain spaces or newlines");
    out += "meta " + k + " " + v + "\n";
  }
  for (const auto& p : ckpt.params) {
    out += "param " + p.name + " " + to_string(p.group) + " " + std::to_string(p.value.rank());
    for (auto e : p.value.shape()) out += " " + std::to_string(e);
    out += "\n";
    const auto vals = p.value.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (i) out += ' ';
      out += format_exact(vals[i]);
    }
    out += "\n";
  }
  return out;
}

Checkpoint parse_checkpoint(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 1;
  auto where = [&] { return " (line " + std::to_string(line_no) + ")"; };
  if (!std::getline(in, line) || line != kCheckpointHeader) {
    fail(ErrorKind::Parse, "checkpoint: missing or unsupported header");
  }
  Checkpoint ckpt;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.rfind("meta ", 0) == 0) {
      const auto rest = line.substr(5);
      const auto sp = rest.find(' ');
      if (sp == std::string::npos) {
        ckpt.meta[rest] = "";
      } else {
        ckpt.meta[rest.substr(0, sp)] = rest.substr(sp + 1);
      }
      continue;
    }
    if (line.rfind("param ", 0) != 0) fail(ErrorKind::Parse, "checkpoint: unexpected record" + where());
    const auto head = split_whitespace(line);
    if (head.size() < 5) fail(ErrorKind::Parse, "checkpoint: short param record" + where());
    const auto rank = static_cast<std::size_t>(parse_int(head[3]));
    if (head.size() != 4 + rank) fail(ErrorKind::Parse, "checkpoint: bad shape" + where());
    std::vector<std::size_t> shape;
    for (std::size_t i = 0; i < rank; ++i) shape.push_back(static_cast<std::size_t>(parse_int(head[4 + i])));
    if (!std::getline(in, line)) fail(ErrorKind::Parse, "checkpoint: missing values" + where());
    ++line_no;
    std::vector<double> values;
    for (auto tok : split_whitespace(line)) values.push_back(parse_double(tok));
    try {
      ckpt.params.emplace_back(head[1], Tensor(shape, std::move(values)), lr_group_from_string(head[2]));
    } catch (const Error& e) {
      fail(ErrorKind::Parse, std::string("checkpoint: ") + e.what() + where());
    }
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << serialize_checkpoint(ckpt);
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Dependency, "cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace prectr::num
