#include "nsn/config.hpp"

#include <charconv>
#include <iomanip>
#include <sstream>

namespace nsn {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) throw ConfigError("bad value for " + key + ": '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("bad boolean for " + key + ": '" + value + "'");
}

}  // namespace

std::string to_string(TrainMode mode) { return mode == TrainMode::kNsn ? "nsn" : "reference"; }

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch < 1) throw ConfigError("batch must be at least 1");
  if (!(l2_lambda >= 0.0)) throw ConfigError("l2 must be non-negative");
  if (mode == TrainMode::kNsn && n_hidden < 1) throw ConfigError("nsn mode needs n_hidden >= 1");
  if (!(input_keep > 0.0 && input_keep <= 1.0)) throw ConfigError("input_keep must lie in (0, 1]");
  if (!(hidden_keep > 0.0 && hidden_keep <= 1.0)) throw ConfigError("hidden_keep must lie in (0, 1]");
  if (width < 1) throw ConfigError("width must be positive");
  schedule.validate();
}

std::string TrainConfig::to_key_values() const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "mode=" << to_string(mode) << '\n'
      << "n_hidden=" << n_hidden << '\n'
      << "epochs=" << epochs << '\n'
      << "batch=" << batch << '\n'
      << "lr=" << schedule.base_lr << '\n'
      << "alpha=" << schedule.alpha << '\n'
      << "decay_every=" << schedule.decay_every << '\n'
      << "decay_factor=" << schedule.decay_factor << '\n'
      << "l2=" << l2_lambda << '\n'
      << "input_keep=" << input_keep << '\n'
      << "hidden_keep=" << hidden_keep << '\n'
      << "init_seed=" << seeds.init << '\n'
      << "shuffle_seed=" << seeds.shuffle << '\n'
      << "dropout_seed=" << seeds.dropout << '\n'
      << "shuffle=" << (shuffle ? "true" : "false") << '\n'
      << "width=" << width << '\n'
      << "data_dir=" << data_dir.string() << '\n'
      << "out_dir=" << out_dir.string() << '\n';
  return out.str();
}

void apply_setting(TrainConfig& c, const std::string& key, const std::string& value) {
  if (key == "mode") {
    if (value == "nsn") {
      c.mode = TrainMode::kNsn;
    } else if (value == "reference" || value == "ref") {
      c.mode = TrainMode::kReference;
    } else {
      throw ConfigError("bad mode '" + value + "'");
    }
  } else if (key == "n_hidden") {
    c.n_hidden = parse_number<std::size_t>(key, value);
  } else if (key == "epochs") {
    c.epochs = parse_number<std::size_t>(key, value);
  } else if (key == "batch") {
    c.batch = parse_number<std::size_t>(key, value);
  } else if (key == "lr") {
    c.schedule.base_lr = parse_number<double>(key, value);
  } else if (key == "alpha") {
    c.schedule.alpha = parse_number<double>(key, value);
  } else if (key == "decay_every") {
    c.schedule.decay_every = parse_number<std::size_t>(key, value);
  } else if (key == "decay_factor") {
    c.schedule.decay_factor = parse_number<double>(key, value);
  } else if (key == "l2") {
    c.l2_lambda = parse_number<double>(key, value);
  } else if (key == "input_keep") {
    c.input_keep = parse_number<double>(key, value);
  } else if (key == "hidden_keep") {
    c.hidden_keep = parse_number<double>(key, value);
  } else if (key == "seed") {
    const auto s = parse_number<std::uint64_t>(key, value);
    c.seeds = {s, s, s};
  } else if (key == "init_seed") {
    c.seeds.init = parse_number<std::uint64_t>(key, value);
  } else if (key == "shuffle_seed") {
    c.seeds.shuffle = parse_number<std::uint64_t>(key, value);
  } else if (key == "dropout_seed") {
    c.seeds.dropout = parse_number<std::uint64_t>(key, value);
  } else if (key == "shuffle") {
    c.shuffle = parse_bool(key, value);
  } else if (key == "width") {
    c.width = parse_number<std::size_t>(key, value);
  } else if (key == "data_dir") {
    c.data_dir = value;
  } else if (key == "out_dir") {
    c.out_dir = value;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void apply_key_values(TrainConfig& config, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + " is not key=value: '" + line + "'");
    }
    apply_setting(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

}  // namespace nsn
