#include "sragmav/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "sragmav/mav.hpp"
#include "sragmav/promptgen.hpp"
#include "sragmav/reformulate.hpp"
#include "sragmav/retrieval.hpp"
#include "sragmav/scoring.hpp"
#include "sragmav/text.hpp"

namespace sragmav {

namespace {

struct Value {
  enum class Type { string, integer, real, boolean, array };

  Type type = Type::string;
  std::string s;
  std::int64_t i = 0;
  double d = 0.0;
  bool b = false;
  std::vector<std::string> a;
};

[[noreturn]] void type_error(const std::string& ctx, const char* expected) {
  throw ConfigError(ctx + ": expected " + expected);
}

std::string as_string(const Value& v, const std::string& ctx) {
  if (v.type != Value::Type::string) {
    type_error(ctx, "a quoted string");
  }
  return v.s;
}

std::int64_t as_int(const Value& v, const std::string& ctx) {
  if (v.type != Value::Type::integer) {
    type_error(ctx, "an integer");
  }
  return v.i;
}

int as_int32(const Value& v, const std::string& ctx) {
  return static_cast<int>(as_int(v, ctx));
}

double as_double(const Value& v, const std::string& ctx) {
  if (v.type == Value::Type::integer) {
    return static_cast<double>(v.i);
  }
  if (v.type != Value::Type::real) {
    type_error(ctx, "a number");
  }
  return v.d;
}

bool as_bool(const Value& v, const std::string& ctx) {
  if (v.type != Value::Type::boolean) {
    type_error(ctx, "true or false");
  }
  return v.b;
}

std::vector<std::string> as_array(const Value& v, const std::string& ctx) {
  if (v.type != Value::Type::array) {
    type_error(ctx, "an array of strings");
  }
  return v.a;
}

std::string escape_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  out += "\"";
  return out;
}

std::string render_int(std::int64_t v) { return std::to_string(v); }

std::string render_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string render_bool(bool v) { return v ? "true" : "false"; }

std::string render_array(const std::vector<std::string>& items) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) {
      out += ", ";
    }
    out += escape_string(items[i]);
  }
  out += "]";
  return out;
}

/// Quoted string starting at text[pos] == '"'. Leaves pos one past the
/// closing quote.
std::string parse_quoted(std::string_view text, std::size_t& pos,
                         const std::string& ctx) {
  std::string out;
  ++pos;  // opening quote
  while (pos < text.size()) {
    const char c = text[pos];
    if (c == '"') {
      ++pos;
      return out;
    }
    if (c == '\\') {
      if (pos + 1 >= text.size()) {
        throw ConfigError(ctx + ": dangling escape");
      }
      const char esc = text[pos + 1];
      switch (esc) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        default:
          throw ConfigError(ctx + ": unsupported escape \\" + std::string(1, esc));
      }
      pos += 2;
      continue;
    }
    out += c;
    ++pos;
  }
  throw ConfigError(ctx + ": unterminated string");
}

Value parse_value(std::string_view token, const std::string& ctx) {
  Value v;
  if (token.empty()) {
    throw ConfigError(ctx + ": missing value");
  }
  if (token.front() == '"') {
    std::size_t pos = 0;
    v.type = Value::Type::string;
    v.s = parse_quoted(token, pos, ctx);
    if (!trim(token.substr(pos)).empty()) {
      throw ConfigError(ctx + ": unexpected content after string");
    }
    return v;
  }
  if (token.front() == '[') {
    v.type = Value::Type::array;
    std::size_t pos = 1;
    bool expect_item = true;
    while (true) {
      while (pos < token.size() &&
             (token[pos] == ' ' || token[pos] == '\t')) {
        ++pos;
      }
      if (pos >= token.size()) {
        throw ConfigError(ctx + ": unterminated array");
      }
      if (token[pos] == ']') {
        ++pos;
        break;
      }
      if (!expect_item) {
        if (token[pos] != ',') {
          throw ConfigError(ctx + ": expected , or ] in array");
        }
        ++pos;
        expect_item = true;
        continue;
      }
      if (token[pos] != '"') {
        throw ConfigError(ctx + ": array elements must be quoted strings");
      }
      v.a.push_back(parse_quoted(token, pos, ctx));
      expect_item = false;
    }
    if (!trim(token.substr(pos)).empty()) {
      throw ConfigError(ctx + ": unexpected content after array");
    }
    return v;
  }
  if (token == "true" || token == "false") {
    v.type = Value::Type::boolean;
    v.b = token == "true";
    return v;
  }
  {
    std::int64_t parsed = 0;
    auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(),
                                     parsed);
    if (ec == std::errc() && end == token.data() + token.size()) {
      v.type = Value::Type::integer;
      v.i = parsed;
      return v;
    }
  }
  {
    double parsed = 0.0;
    auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(),
                                     parsed);
    if (ec == std::errc() && end == token.data() + token.size()) {
      v.type = Value::Type::real;
      v.d = parsed;
      return v;
    }
  }
  throw ConfigError(ctx + ": cannot parse value \"" + std::string(token) +
                    "\" (strings must be quoted)");
}

struct Field {
  const char* section;
  const char* key;
  void (*set)(PipelineConfig&, const Value&, const std::string&);
  std::string (*render)(const PipelineConfig&);
};

const Field kFields[] = {
    {"dataset", "train",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.dataset.train = as_string(v, x); },
     +[](const PipelineConfig& c) { return escape_string(c.dataset.train); }},
    {"dataset", "test",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.dataset.test = as_string(v, x); },
     +[](const PipelineConfig& c) { return escape_string(c.dataset.test); }},

    {"tr", "non_hate_group",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.tr.non_hate_group = as_string(v, x); },
     +[](const PipelineConfig& c) { return escape_string(c.tr.non_hate_group); }},
    {"tr", "on_violation",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.tr.on_violation = as_string(v, x); },
     +[](const PipelineConfig& c) { return escape_string(c.tr.on_violation); }},

    {"format", "field_delimiter",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.format.field_delimiter = as_string(v, x); },
     +[](const PipelineConfig& c) { return escape_string(c.format.field_delimiter); }},
    {"format", "record_separator",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.format.record_separator = as_string(v, x); },
     +[](const PipelineConfig& c) { return escape_string(c.format.record_separator); }},
    {"format", "terminator",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.format.terminator = as_string(v, x); },
     +[](const PipelineConfig& c) { return escape_string(c.format.terminator); }},
    {"format", "hate_token",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.format.hate_token = as_string(v, x); },
     +[](const PipelineConfig& c) { return escape_string(c.format.hate_token); }},
    {"format", "non_hate_token",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.format.non_hate_token = as_string(v, x); },
     +[](const PipelineConfig& c) { return escape_string(c.format.non_hate_token); }},

    {"embedding", "backend",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.embedding.backend = as_string(v, x); },
     +[](const PipelineConfig& c) { return escape_string(c.embedding.backend); }},
    {"embedding", "url",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.embedding.url = as_string(v, x); },
     +[](const PipelineConfig& c) { return escape_string(c.embedding.url); }},
    {"embedding", "model",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.embedding.model = as_string(v, x); },
     +[](const PipelineConfig& c) { return escape_string(c.embedding.model); }},
    {"embedding", "api_key_env",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.embedding.api_key_env = as_string(v, x); },
     +[](const PipelineConfig& c) { return escape_string(c.embedding.api_key_env); }},
    {"embedding", "vectors",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.embedding.vectors = as_string(v, x); },
     +[](const PipelineConfig& c) { return escape_string(c.embedding.vectors); }},
    {"embedding", "mock_mode",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.embedding.mock_mode = as_string(v, x); },
     +[](const PipelineConfig& c) { return escape_string(c.embedding.mock_mode); }},
    {"embedding", "dim",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.embedding.dim = as_int32(v, x); },
     +[](const PipelineConfig& c) { return render_int(c.embedding.dim); }},
    {"embedding", "batch_size",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.embedding.batch_size = as_int32(v, x); },
     +[](const PipelineConfig& c) { return render_int(c.embedding.batch_size); }},
    {"embedding", "timeout_ms",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.embedding.timeout_ms = as_int32(v, x); },
     +[](const PipelineConfig& c) { return render_int(c.embedding.timeout_ms); }},

    {"llm", "backend",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.llm.backend = as_string(v, x); },
     +[](const PipelineConfig& c) { return escape_string(c.llm.backend); }},
    {"llm", "url",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.llm.url = as_string(v, x); },
     +[](const PipelineConfig& c) { return escape_string(c.llm.url); }},
    {"llm", "model",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.llm.model = as_string(v, x); },
     +[](const PipelineConfig& c) { return escape_string(c.llm.model); }},
    {"llm", "api_key_env",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.llm.api_key_env = as_string(v, x); },
     +[](const PipelineConfig& c) { return escape_string(c.llm.api_key_env); }},
    {"llm", "mock_spec",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.llm.mock_spec = as_string(v, x); },
     +[](const PipelineConfig& c) { return escape_string(c.llm.mock_spec); }},
    {"llm", "temperature",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.llm.temperature = as_double(v, x); },
     +[](const PipelineConfig& c) { return render_double(c.llm.temperature); }},
    {"llm", "max_tokens",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.llm.max_tokens = as_int32(v, x); },
     +[](const PipelineConfig& c) { return render_int(c.llm.max_tokens); }},
    {"llm", "stop",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.llm.stop = as_array(v, x); },
     +[](const PipelineConfig& c) { return render_array(c.llm.stop); }},
    {"llm", "append_missing_stop",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.llm.append_missing_stop = as_bool(v, x); },
     +[](const PipelineConfig& c) { return render_bool(c.llm.append_missing_stop); }},
    {"llm", "timeout_ms",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.llm.timeout_ms = as_int32(v, x); },
     +[](const PipelineConfig& c) { return render_int(c.llm.timeout_ms); }},
    {"llm", "retry_attempts",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.llm.retry_attempts = as_int32(v, x); },
     +[](const PipelineConfig& c) { return render_int(c.llm.retry_attempts); }},
    {"llm", "retry_initial_ms",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.llm.retry_initial_ms = as_int32(v, x); },
     +[](const PipelineConfig& c) { return render_int(c.llm.retry_initial_ms); }},
    {"llm", "retry_max_ms",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.llm.retry_max_ms = as_int32(v, x); },
     +[](const PipelineConfig& c) { return render_int(c.llm.retry_max_ms); }},
    {"llm", "retry_multiplier",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.llm.retry_multiplier = as_double(v, x); },
     +[](const PipelineConfig& c) { return render_double(c.llm.retry_multiplier); }},

    {"mav", "k",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.mav.k = as_int32(v, x); },
     +[](const PipelineConfig& c) { return render_int(c.mav.k); }},
    {"mav", "tau",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.mav.tau = as_int32(v, x); },
     +[](const PipelineConfig& c) { return render_int(c.mav.tau); }},
    {"mav", "max_rounds",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.mav.max_rounds = as_int32(v, x); },
     +[](const PipelineConfig& c) { return render_int(c.mav.max_rounds); }},
    {"mav", "failure_budget",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.mav.failure_budget = as_int32(v, x); },
     +[](const PipelineConfig& c) { return render_int(c.mav.failure_budget); }},
    {"mav", "per_triplet_voting",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.mav.per_triplet_voting = as_bool(v, x); },
     +[](const PipelineConfig& c) { return render_bool(c.mav.per_triplet_voting); }},

    {"template", "instruction",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.tmpl.instruction = as_string(v, x); },
     +[](const PipelineConfig& c) { return escape_string(c.tmpl.instruction); }},
    {"template", "example_format",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.tmpl.example_format = as_string(v, x); },
     +[](const PipelineConfig& c) { return escape_string(c.tmpl.example_format); }},
    {"template", "include_example_answer",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.tmpl.include_example_answer = as_bool(v, x); },
     +[](const PipelineConfig& c) { return render_bool(c.tmpl.include_example_answer); }},

    {"scoring", "theta",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.scoring.theta = as_double(v, x); },
     +[](const PipelineConfig& c) { return render_double(c.scoring.theta); }},
    {"scoring", "comparison",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.scoring.comparison = as_string(v, x); },
     +[](const PipelineConfig& c) { return escape_string(c.scoring.comparison); }},

    {"runtime", "seed",
     +[](PipelineConfig& c, const Value& v, const std::string& x) {
       const std::int64_t seed = as_int(v, x);
       if (seed < 0) {
         throw ConfigError(x + ": seed must be >= 0");
       }
       c.runtime.seed = static_cast<std::uint64_t>(seed);
     },
     +[](const PipelineConfig& c) { return render_int(static_cast<std::int64_t>(c.runtime.seed)); }},
    {"runtime", "workers",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.runtime.workers = as_int32(v, x); },
     +[](const PipelineConfig& c) { return render_int(c.runtime.workers); }},
    {"runtime", "max_in_flight",
     +[](PipelineConfig& c, const Value& v, const std::string& x) { c.runtime.max_in_flight = as_int32(v, x); },
     +[](const PipelineConfig& c) { return render_int(c.runtime.max_in_flight); }},
};

const Field* find_field(std::string_view section, std::string_view key) {
  for (const Field& f : kFields) {
    if (section == f.section && key == f.key) {
      return &f;
    }
  }
  return nullptr;
}

bool known_section(std::string_view section) {
  for (const Field& f : kFields) {
    if (section == f.section) {
      return true;
    }
  }
  return false;
}

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
    } else if (c == '"') {
      in_string = true;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

void require_positive(int value, const char* what) {
  if (value < 1) {
    throw ConfigError(std::string(what) + " must be >= 1");
  }
}

}  // namespace

void PipelineConfig::validate() const {
  violation_policy_from_string(tr.on_violation);
  if (trim(tr.non_hate_group).empty()) {
    throw ConfigError("tr.non_hate_group must be non-empty");
  }
  format.validate();

  if (embedding.backend != "mock" && embedding.backend != "http" &&
      embedding.backend != "file") {
    throw ConfigError("embedding.backend must be mock, http, or file");
  }
  HashEmbeddingBackend::mode_from_string(embedding.mock_mode);
  require_positive(embedding.dim, "embedding.dim");
  require_positive(embedding.batch_size, "embedding.batch_size");
  require_positive(embedding.timeout_ms, "embedding.timeout_ms");

  if (llm.backend != "mock" && llm.backend != "http") {
    throw ConfigError("llm.backend must be mock or http");
  }
  if (!(llm.temperature >= 0.0) || !std::isfinite(llm.temperature)) {
    throw ConfigError("llm.temperature must be finite and >= 0");
  }
  require_positive(llm.max_tokens, "llm.max_tokens");
  require_positive(llm.timeout_ms, "llm.timeout_ms");
  require_positive(llm.retry_attempts, "llm.retry_attempts");
  if (llm.retry_initial_ms < 0 || llm.retry_max_ms < llm.retry_initial_ms) {
    throw ConfigError("llm retry delays must satisfy 0 <= initial <= max");
  }
  if (!(llm.retry_multiplier >= 1.0)) {
    throw ConfigError("llm.retry_multiplier must be >= 1");
  }

  MavConfig probe;
  probe.k = mav.k;
  probe.tau = mav.tau;
  probe.max_rounds = mav.max_rounds;
  probe.failure_budget = mav.failure_budget;
  probe.per_triplet_voting = mav.per_triplet_voting;
  probe.temperature = llm.temperature;
  probe.format = format;
  probe.validate();

  MatchPolicy policy{scoring.theta,
                     MatchPolicy::comparison_from_string(scoring.comparison)};
  policy.validate();

  require_positive(runtime.workers, "runtime.workers");
  require_positive(runtime.max_in_flight, "runtime.max_in_flight");

  if (!tmpl.instruction.empty() || !tmpl.example_format.empty()) {
    PromptTemplate probe_tmpl = default_prompt_template(
        Arity::triplet, format, TrRule{tr.non_hate_group},
        tmpl.include_example_answer);
    if (!tmpl.instruction.empty()) {
      probe_tmpl.instruction = tmpl.instruction;
    }
    if (!tmpl.example_format.empty()) {
      probe_tmpl.example_format = tmpl.example_format;
    }
    probe_tmpl.validate();
  }
}

PipelineConfig parse_config(std::string_view text,
                            const std::string& source_name) {
  PipelineConfig cfg;
  std::set<std::string> seen;
  std::string section;
  std::istringstream lines{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;

  while (std::getline(lines, raw)) {
    ++lineno;
    const std::string where = source_name + ":" + std::to_string(lineno);
    const std::string stripped = strip_comment(raw);
    std::string_view line = trim(stripped);
    if (line.empty()) {
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ConfigError(where + ": malformed section header");
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!known_section(section)) {
        throw ConfigError(where + ": unknown section [" + section + "]");
      }
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(where + ": expected key = value");
    }
    const std::string key{trim(line.substr(0, eq))};
    const std::string_view value_text = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(where + ": empty key");
    }
    if (section.empty()) {
      throw ConfigError(where + ": key \"" + key + "\" outside any [section]");
    }
    const Field* field = find_field(section, key);
    if (field == nullptr) {
      throw ConfigError(where + ": unknown key " + section + "." + key);
    }
    if (!seen.insert(section + "." + key).second) {
      throw ConfigError(where + ": duplicate key " + section + "." + key);
    }
    field->set(cfg, parse_value(value_text, where), where + ": " + section + "." + key);
  }

  // unless the file pins stop strings, stop at the configured terminator
  if (!seen.contains("llm.stop") && seen.contains("format.terminator")) {
    cfg.llm.stop = {cfg.format.terminator};
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open config file: " + path);
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path);
}

std::string dump_config(const PipelineConfig& cfg) {
  std::string out;
  std::string_view current;
  for (const Field& f : kFields) {
    if (current != f.section) {
      if (!out.empty()) {
        out += "\n";
      }
      out += "[" + std::string(f.section) + "]\n";
      current = f.section;
    }
    out += std::string(f.key) + " = " + f.render(cfg) + "\n";
  }
  return out;
}

}  // namespace sragmav
