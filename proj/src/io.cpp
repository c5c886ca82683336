#include "blockboot/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace blockboot {

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, end);
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path temp = path;
  temp += ".partial";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + temp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(temp);
      throw Error("write to " + temp.string() + " failed");
    }
  }
  std::filesystem::rename(temp, path);
}

// --------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<std::size_t> numbered(std::string_view name, char prefix) {
  if (name.size() < 2 || name[0] != prefix) return std::nullopt;
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), value);
  if (ec != std::errc() || ptr != name.data() + name.size()) return std::nullopt;
  return value;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

DataTable parse_data_csv(std::string_view text, std::string_view source) {
  const std::string where(source);
  auto fail = [&](std::size_t line, const std::string& message) -> DataError {
    return DataError(where + ":" + std::to_string(line) + ": " + message);
  };

  std::vector<std::pair<std::size_t, std::string_view>> lines;
  std::size_t number = 0, start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    const std::string_view line =
        text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    ++number;
    if (!trim(line).empty()) lines.emplace_back(number, line);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  if (lines.empty()) throw fail(1, "missing header");

  const auto header = split_fields(lines.front().second);
  const std::size_t header_line = lines.front().first;
  DataTable table;
  std::size_t col = 0;
  while (col < header.size()) {
    const auto k = numbered(header[col], 's');
    if (!k) break;
    if (*k != col + 1) throw fail(header_line, "expected column s" + std::to_string(col + 1));
    ++col;
  }
  table.dim = static_cast<int>(col);
  while (col < header.size()) {
    const auto k = numbered(header[col], 'x');
    if (!k) break;
    if (*k != table.q + 1) throw fail(header_line, "expected column x" + std::to_string(table.q + 1));
    ++table.q;
    ++col;
  }
  if (table.dim == 0) throw fail(header_line, "header must start with s1");
  if (col + 1 != header.size() || header[col] != "y") {
    throw fail(header_line, "header must be s1,...,sd,x1,...,xq,y");
  }

  const std::size_t width = header.size();
  const std::size_t rows = lines.size() - 1;
  table.sites.resize(static_cast<Eigen::Index>(rows), table.dim);
  table.covariates.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(table.q));
  table.y.resize(static_cast<Eigen::Index>(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto [line_no, line] = lines[r + 1];
    const auto fields = split_fields(line);
    if (fields.size() != width) {
      throw fail(line_no, "expected " + std::to_string(width) + " fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < width; ++c) {
      const std::string_view f = fields[c];
      if (f.empty()) throw fail(line_no, "missing value in column " + std::string(header[c]));
      double value = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(value)) {
        throw fail(line_no, "invalid number '" + std::string(f) + "' in column " + std::string(header[c]));
      }
      const auto row = static_cast<Eigen::Index>(r);
      if (c < static_cast<std::size_t>(table.dim)) {
        table.sites(row, static_cast<Eigen::Index>(c)) = value;
      } else if (c + 1 < width) {
        table.covariates(row, static_cast<Eigen::Index>(c - static_cast<std::size_t>(table.dim))) = value;
      } else {
        table.y[row] = value;
      }
    }
  }
  return table;
}

DataTable read_data_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open data file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_data_csv(buffer.str(), path.string());
}

std::string data_csv(const DataTable& table) {
  std::string out;
  for (int c = 0; c < table.dim; ++c) out += "s" + std::to_string(c + 1) + ",";
  for (std::size_t j = 0; j < table.q; ++j) out += "x" + std::to_string(j + 1) + ",";
  out += "y\n";
  for (Eigen::Index i = 0; i < table.y.size(); ++i) {
    for (int c = 0; c < table.dim; ++c) out += format_number(table.sites(i, c)) + ",";
    for (std::size_t j = 0; j < table.q; ++j) {
      out += format_number(table.covariates(i, static_cast<Eigen::Index>(j))) + ",";
    }
    out += format_number(table.y[i]) + "\n";
  }
  return out;
}

ResolvedRegion resolve_region(const RegionSpec& spec, SiteMatrix& sites) {
  if (sites.cols() != spec.dim) {
    throw DataError("data has " + std::to_string(sites.cols()) + " coordinates but the region has dimension " +
                    std::to_string(spec.dim));
  }
  if (spec.lambda) {
    return {Region(spec.prototype, spec.dim, *spec.lambda), std::vector<double>(static_cast<std::size_t>(spec.dim)),
            std::nullopt};
  }
  if (sites.rows() == 0) throw DataError("cannot infer the region from an empty data set");
  std::vector<double> shift(static_cast<std::size_t>(spec.dim));
  double lambda = 0.0;
  for (int c = 0; c < spec.dim; ++c) {
    const double lo = sites.col(c).minCoeff();
    const double hi = sites.col(c).maxCoeff();
    shift[static_cast<std::size_t>(c)] = lo;
    lambda = std::max(lambda, hi - lo);
    sites.col(c).array() -= lo;
  }
  if (!(lambda > 0.0)) throw DataError("all sites coincide; the region cannot be inferred");
  if (spec.prototype == Prototype::unit_disk) {
    throw ConfigError("region.lambda: automatic detection supports only the unit-cube prototype");
  }
  return {Region(spec.prototype, spec.dim, lambda), std::move(shift),
          "region inferred from the bounding box (lambda = " + format_number(lambda) +
              "); scaled variances depend on lambda"};
}

// --------------------------------------------------------------------------
// Configuration

namespace {

std::string key_path(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void allow_keys(const Json& object, const std::string& path, std::initializer_list<std::string_view> allowed) {
  if (!object.is_object()) throw ConfigError((path.empty() ? "config" : path) + ": expected an object");
  for (const auto& [key, value] : object.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(key_path(path, key) + ": unknown key");
    }
  }
}

const Json* member(const Json& object, std::string_view key) {
  const auto it = object.find(key);
  return it == object.end() ? nullptr : &*it;
}

double as_number(const Json& value, const std::string& path) {
  if (!value.is_number()) throw ConfigError(path + ": expected a number");
  return value.get<double>();
}

double positive(const Json& value, const std::string& path) {
  const double x = as_number(value, path);
  if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(path + ": must be positive");
  return x;
}

std::size_t as_count(const Json& value, const std::string& path) {
  if (!value.is_number_integer() || value.get<long long>() < 0) {
    throw ConfigError(path + ": expected a non-negative integer");
  }
  return value.get<std::size_t>();
}

std::string as_string(const Json& value, const std::string& path) {
  if (!value.is_string()) throw ConfigError(path + ": expected a string");
  return value.get<std::string>();
}

std::vector<double> as_numbers(const Json& value, const std::string& path) {
  if (!value.is_array()) throw ConfigError(path + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < value.size(); ++i) out.push_back(as_number(value[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

template <class F>
auto parsed(const Json& value, const std::string& path, F parse) {
  try {
    return parse(as_string(value, path));
  } catch (const std::exception& e) {
    if (std::string_view(e.what()).starts_with(path)) throw;
    throw ConfigError(path + ": " + e.what());
  }
}

std::array<double, 2> as_pair(const Json& value, const std::string& path) {
  const auto v = as_numbers(value, path);
  if (v.size() != 2) throw ConfigError(path + ": expected two numbers");
  return {v[0], v[1]};
}

void parse_region(const Json& s, Config& c) {
  allow_keys(s, "region", {"prototype", "dim", "lambda"});
  if (auto v = member(s, "prototype")) {
    c.region.prototype = parsed(*v, "region.prototype", [](const std::string& t) { return parse_prototype(t); });
  }
  if (auto v = member(s, "dim")) {
    const auto d = as_count(*v, "region.dim");
    if (d < 1 || d > 3) throw ConfigError("region.dim: must be 1, 2 or 3");
    c.region.dim = static_cast<int>(d);
  }
  if (auto v = member(s, "lambda")) {
    if (v->is_string() && v->get<std::string>() == "auto") c.region.lambda.reset();
    else c.region.lambda = positive(*v, "region.lambda");
  }
}

void parse_design(const Json& s, Config& c, DesignKind& kind, double& a, MixtureParams& mixture) {
  allow_keys(s, "design", {"kind", "a", "mixture"});
  if (auto v = member(s, "kind")) {
    kind = parsed(*v, "design.kind", [](const std::string& t) { return parse_design_kind(t); });
  }
  if (auto v = member(s, "a")) {
    a = as_number(*v, "design.a");
    if (!(a > 4.0)) throw ConfigError("design.a: must exceed 4");
  }
  if (auto v = member(s, "mixture")) {
    allow_keys(*v, "design.mixture", {"mean1", "mean2", "var1", "var2", "weight1"});
    if (auto m = member(*v, "mean1")) mixture.mean1 = as_pair(*m, "design.mixture.mean1");
    if (auto m = member(*v, "mean2")) mixture.mean2 = as_pair(*m, "design.mixture.mean2");
    if (auto m = member(*v, "var1")) mixture.var1 = positive(*m, "design.mixture.var1");
    if (auto m = member(*v, "var2")) mixture.var2 = positive(*m, "design.mixture.var2");
    if (auto m = member(*v, "weight1")) {
      mixture.weight1 = as_number(*m, "design.mixture.weight1");
      if (!(mixture.weight1 >= 0.0 && mixture.weight1 <= 1.0)) {
        throw ConfigError("design.mixture.weight1: must lie in [0, 1]");
      }
    }
  }
  (void)c;
}

void parse_field(const Json& s, Config& c) {
  allow_keys(s, "field", {"family", "sill", "range", "max_sites", "error_mode"});
  if (auto v = member(s, "family")) {
    c.field.family = parsed(*v, "field.family", [](const std::string& t) { return parse_covariance_family(t); });
  }
  if (auto v = member(s, "sill")) {
    c.field.sill = as_number(*v, "field.sill");
    if (!(c.field.sill >= 0.0)) throw ConfigError("field.sill: must be non-negative");
  }
  if (auto v = member(s, "range")) c.field.range = positive(*v, "field.range");
  if (auto v = member(s, "max_sites")) c.max_sites = as_count(*v, "field.max_sites");
  if (auto v = member(s, "error_mode")) {
    const auto mode = as_string(*v, "field.error_mode");
    if (mode == "gaussian") c.error_mode = ErrorMode::gaussian;
    else if (mode == "clipped") c.error_mode = ErrorMode::clipped;
    else throw ConfigError("field.error_mode: expected gaussian or clipped");
  }
}

void parse_model(const Json& s, Config& c) {
  allow_keys(s, "model", {"n", "covariates", "score", "huber_k", "beta", "tests"});
  if (auto v = member(s, "n")) c.n = as_count(*v, "model.n");
  if (auto v = member(s, "covariates")) c.covariates = as_count(*v, "model.covariates");
  double k = 1.345;
  if (auto v = member(s, "huber_k")) k = positive(*v, "model.huber_k");
  std::string score = "identity";
  if (auto v = member(s, "score")) score = as_string(*v, "model.score");
  try {
    c.score = parse_score(score, k);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("model.score: ") + e.what());
  }
  if (auto v = member(s, "beta")) c.beta = as_numbers(*v, "model.beta");
  if (auto v = member(s, "tests")) {
    if (!v->is_array()) throw ConfigError("model.tests: expected an array");
    for (std::size_t i = 0; i < v->size(); ++i) {
      const std::string path = "model.tests[" + std::to_string(i) + "]";
      allow_keys((*v)[i], path, {"coefficient", "null"});
      HypothesisTest t;
      if (auto m = member((*v)[i], "coefficient")) t.coefficient = as_count(*m, path + ".coefficient");
      if (auto m = member((*v)[i], "null")) t.null_value = as_number(*m, path + ".null");
      c.tests.push_back(t);
    }
  }
}

void parse_selection(const Json& s, Config& c) {
  allow_keys(s, "plan.selection",
             {"enabled", "candidates", "subregions", "subregion_side", "pilot_block", "M_pilot", "M_sub", "aggregate",
              "min_sites"});
  auto& sel = c.selection;
  if (auto v = member(s, "enabled")) {
    if (!v->is_boolean()) throw ConfigError("plan.selection.enabled: expected a boolean");
    c.select = v->get<bool>();
  }
  if (auto v = member(s, "candidates")) {
    sel.candidates = as_numbers(*v, "plan.selection.candidates");
    for (double x : sel.candidates) {
      if (!(x > 0.0)) throw ConfigError("plan.selection.candidates: entries must be positive");
    }
    std::sort(sel.candidates.begin(), sel.candidates.end());
  }
  if (auto v = member(s, "subregions")) sel.subregion_count = as_count(*v, "plan.selection.subregions");
  if (auto v = member(s, "subregion_side")) sel.subregion_side = positive(*v, "plan.selection.subregion_side");
  if (auto v = member(s, "pilot_block")) {
    sel.pilot_block = positive(*v, "plan.selection.pilot_block");
    sel.pilot_rule = PilotRule::fixed;
  }
  if (auto v = member(s, "M_pilot")) sel.M_pilot = as_count(*v, "plan.selection.M_pilot");
  if (auto v = member(s, "M_sub")) sel.M_sub = as_count(*v, "plan.selection.M_sub");
  if (auto v = member(s, "aggregate")) {
    if (!v->is_boolean()) throw ConfigError("plan.selection.aggregate: expected a boolean");
    sel.aggregate_components = v->get<bool>();
  }
  if (auto v = member(s, "min_sites")) sel.min_sites = as_count(*v, "plan.selection.min_sites");
}

void parse_plan(const Json& s, Config& c) {
  allow_keys(s, "plan", {"variant", "variants", "block", "blocks", "M", "ci", "level", "exact", "selection"});
  auto variant = [](const std::string& t) { return parse_variant(t); };
  if (auto v = member(s, "variant")) c.variants = {parsed(*v, "plan.variant", variant)};
  if (auto v = member(s, "variants")) {
    if (!v->is_array() || v->empty()) throw ConfigError("plan.variants: expected a non-empty array");
    c.variants.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      c.variants.push_back(parsed((*v)[i], "plan.variants[" + std::to_string(i) + "]", variant));
    }
  }
  if (auto v = member(s, "block")) {
    if (v->is_string() && v->get<std::string>() == "auto") c.block.reset();
    else c.block = positive(*v, "plan.block");
  }
  if (auto v = member(s, "blocks")) {
    c.blocks = as_numbers(*v, "plan.blocks");
    for (double x : c.blocks) {
      if (!(x > 0.0)) throw ConfigError("plan.blocks: entries must be positive");
    }
  }
  if (auto v = member(s, "M")) {
    c.M = as_count(*v, "plan.M");
    if (c.M < 1) throw ConfigError("plan.M: must be at least 1");
  }
  if (auto v = member(s, "ci")) {
    c.ci_method = parsed(*v, "plan.ci", [](const std::string& t) { return parse_ci_method(t); });
  }
  if (auto v = member(s, "level")) {
    c.level = as_number(*v, "plan.level");
    if (!(c.level > 0.0 && c.level < 1.0)) throw ConfigError("plan.level: must lie in (0, 1)");
  }
  if (auto v = member(s, "exact")) {
    if (!v->is_boolean()) throw ConfigError("plan.exact: expected a boolean");
    c.exact_mode = v->get<bool>();
  }
  if (auto v = member(s, "selection")) parse_selection(*v, c);
}

void parse_experiment(const Json& s, Config& c) {
  allow_keys(s, "experiment", {"S", "name", "scenarios", "field_redraws", "threshold"});
  if (auto v = member(s, "S")) {
    c.S = as_count(*v, "experiment.S");
    if (c.S < 1) throw ConfigError("experiment.S: must be at least 1");
  }
  if (auto v = member(s, "name")) c.name = as_string(*v, "experiment.name");
  if (auto v = member(s, "field_redraws")) c.field_redraws = as_count(*v, "experiment.field_redraws");
  if (auto v = member(s, "threshold")) c.threshold = positive(*v, "experiment.threshold");
  if (auto v = member(s, "scenarios")) {
    if (!v->is_array()) throw ConfigError("experiment.scenarios: expected an array");
    for (std::size_t i = 0; i < v->size(); ++i) {
      allow_keys((*v)[i], "experiment.scenarios[" + std::to_string(i) + "]",
                 {"name", "region", "design", "field", "model", "plan"});
      c.scenarios.push_back((*v)[i]);
    }
  }
}

}  // namespace

Config parse_config(const Json& document) {
  if (document.is_null()) return parse_config(Json::object());
  allow_keys(document, "", {"region", "design", "field", "model", "plan", "experiment"});
  Config c;
  c.echo = document;
  DesignKind kind = DesignKind::uniform;
  double a = 8.0;
  MixtureParams mixture;
  if (auto s = member(document, "region")) parse_region(*s, c);
  if (auto s = member(document, "design")) parse_design(*s, c, kind, a, mixture);
  if (auto s = member(document, "field")) parse_field(*s, c);
  if (auto s = member(document, "model")) parse_model(*s, c);
  if (auto s = member(document, "plan")) parse_plan(*s, c);
  if (auto s = member(document, "experiment")) parse_experiment(*s, c);

  if (kind != DesignKind::uniform && (c.region.dim != 2 || c.region.prototype != Prototype::unit_cube)) {
    throw ConfigError("design.kind: " + std::string(to_string(kind)) + " requires a two-dimensional unit-cube region");
  }
  switch (kind) {
    case DesignKind::uniform: c.design = Design::uniform(c.region.prototype, c.region.dim); break;
    case DesignKind::normal_mixture: c.design = Design::normal_mixture(mixture); break;
    case DesignKind::strip: c.design = Design::strip(a); break;
  }
  const std::size_t p = weight_spec(c).parameters();
  if (!c.beta.empty() && c.beta.size() != p) {
    throw ConfigError("model.beta: expected " + std::to_string(p) + " values");
  }
  for (const auto& t : c.tests) {
    if (t.coefficient >= p) throw ConfigError("model.tests: coefficient index out of range");
  }
  if (c.block && c.region.lambda && *c.block > *c.region.lambda) {
    throw ConfigError("plan.block: exceeds region.lambda");
  }
  return c;
}

Config read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  Json document;
  try {
    document = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(document);
}

WeightSpec weight_spec(const Config& config) {
  return config.covariates == 0 ? WeightSpec::intercept_only() : WeightSpec::with_covariates(config.covariates);
}

Scenario make_scenario(const Config& config) {
  if (!config.region.lambda) throw ConfigError("region.lambda: simulations need an explicit lambda");
  Scenario s;
  s.name = config.name;
  s.design = config.design;
  s.region = Region(config.region.prototype, config.region.dim, *config.region.lambda);
  s.n = config.n;
  s.field = config.field;
  s.weights = weight_spec(config);
  s.score = config.score;
  const std::size_t p = s.weights.parameters();
  s.beta_true = Vec::Zero(static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < config.beta.size(); ++j) s.beta_true[static_cast<Eigen::Index>(j)] = config.beta[j];
  s.error_mode = config.error_mode;
  s.max_sites = config.max_sites;
  return s;
}

std::vector<double> default_candidates(double lambda) {
  return {lambda / 12.0, lambda / 8.0, lambda / 6.0, lambda / 4.0};
}

namespace {

TableScenario table_cell(const Config& c) {
  TableScenario cell;
  cell.scenario = make_scenario(c);
  cell.blocks = c.blocks;
  if (cell.blocks.empty()) {
    if (!c.block) throw ConfigError("plan.blocks: simulations need explicit block sizes");
    cell.blocks = {*c.block};
  }
  for (double b : cell.blocks) {
    if (b > cell.scenario.region.lambda()) throw ConfigError("plan.blocks: block side exceeds region.lambda");
  }
  cell.variants = c.variants;
  cell.ci_method = c.ci_method;
  cell.level = c.level;
  if (c.select) {
    SelectionConfig sel = c.selection;
    if (sel.candidates.empty()) {
      sel.candidates = cell.blocks;
      std::sort(sel.candidates.begin(), sel.candidates.end());
    }
    cell.selection = sel;
  }
  return cell;
}

}  // namespace

std::vector<TableScenario> table_grid(const Config& config) {
  std::vector<TableScenario> grid;
  if (config.scenarios.empty()) {
    grid.push_back(table_cell(config));
    if (grid.back().scenario.name.empty()) grid.back().scenario.name = "scenario-1";
    return grid;
  }
  for (std::size_t i = 0; i < config.scenarios.size(); ++i) {
    Json merged = config.echo;
    Json patch = config.scenarios[i];
    std::string name = "scenario-" + std::to_string(i + 1);
    if (auto v = member(patch, "name")) {
      name = as_string(*v, "experiment.scenarios[" + std::to_string(i) + "].name");
      patch.erase("name");
    }
    if (merged.contains("experiment")) merged["experiment"].erase("scenarios");
    merged.merge_patch(patch);
    Config sub;
    try {
      sub = parse_config(merged);
    } catch (const ConfigError& e) {
      throw ConfigError("experiment.scenarios[" + std::to_string(i) + "]: " + e.what());
    }
    grid.push_back(table_cell(sub));
    grid.back().scenario.name = name;
  }
  return grid;
}

DemoConfig demo_config(const Config& config) {
  DemoConfig demo;
  const Json& e = config.echo;
  auto given = [&](const char* section, const char* key) {
    return e.contains(section) && e[section].contains(key);
  };
  if (given("design", "a")) demo.a = config.design.strip_a();
  if (given("design", "kind")) demo.design = config.design.kind();
  if (given("region", "lambda")) {
    if (!config.region.lambda) throw ConfigError("region.lambda: the demo needs an explicit lambda");
    demo.lambda = *config.region.lambda;
  }
  if (given("plan", "blocks")) demo.blocks = config.blocks;
  else if (given("plan", "block") && config.block) demo.blocks = {*config.block};
  if (given("plan", "M")) demo.M = config.M;
  if (given("experiment", "S")) demo.S = config.S;
  if (e.contains("field")) {
    demo.field = config.field;
    if (!given("field", "range")) demo.field.range = 1.0;
  }
  demo.error_mode = config.error_mode;
  demo.max_sites = config.max_sites;
  demo.field_redraws = config.field_redraws;
  demo.threshold = config.threshold;
  if (config.region.dim != 2 || config.region.prototype != Prototype::unit_cube) {
    throw ConfigError("region: the demo runs on the two-dimensional unit-cube");
  }
  for (double b : demo.blocks) {
    if (b > demo.lambda) throw ConfigError("plan.blocks: block side exceeds region.lambda");
  }
  return demo;
}

// --------------------------------------------------------------------------
// Results

TestResult normal_test(double estimate, double se, std::size_t coefficient, double null_value) {
  TestResult t;
  t.coefficient = coefficient;
  t.null_value = null_value;
  const double gap = std::abs(estimate - null_value);
  if (!(se > 0.0)) {
    t.degenerate = true;
    t.p_value = gap == 0.0 ? 1.0 : 0.0;
    return t;
  }
  t.p_value = std::erfc(gap / se / std::sqrt(2.0));
  return t;
}

Json to_json(const ResultBundle& b) {
  Json out;
  out["version"] = b.version;
  out["seed"] = b.seed;
  out["variant"] = std::string(to_string(b.variant));
  out["ci_method"] = std::string(to_string(b.ci_method));
  out["level"] = b.level;
  out["lambda"] = b.lambda;
  out["n"] = b.n;
  out["block"] = {{"size", b.block}, {"selected", b.block_selected}};
  Json coefficients = Json::array();
  for (const auto& c : b.coefficients) {
    coefficients.push_back({{"estimate", c.estimate}, {"se", c.se}, {"ci", {c.ci_lower, c.ci_upper}}});
  }
  out["coefficients"] = coefficients;
  Json tests = Json::array();
  for (const auto& t : b.tests) {
    Json entry{{"coefficient", t.coefficient}, {"null", t.null_value}, {"p_value", t.p_value},
               {"degenerate", t.degenerate}};
    if (t.degenerate) entry["note"] = "degenerate (SE=0)";
    tests.push_back(entry);
  }
  out["tests"] = tests;
  out["n_star"] = {{"mean", b.n_star_mean}, {"expected", b.n_star_expected}};
  out["replicates"] = {{"attempted", b.replicates}, {"failed", b.failed_replicates}, {"exact", b.exact}};
  out["warnings"] = b.warnings;
  out["config"] = b.config;
  return out;
}

ResultBundle bundle_from_json(const Json& j) {
  try {
    ResultBundle b;
    b.version = j.at("version").get<std::string>();
    b.seed = j.at("seed").get<std::uint64_t>();
    b.variant = parse_variant(j.at("variant").get<std::string>());
    b.ci_method = parse_ci_method(j.at("ci_method").get<std::string>());
    b.level = j.at("level").get<double>();
    b.lambda = j.at("lambda").get<double>();
    b.n = j.at("n").get<std::size_t>();
    b.block = j.at("block").at("size").get<double>();
    b.block_selected = j.at("block").at("selected").get<bool>();
    for (const auto& c : j.at("coefficients")) {
      b.coefficients.push_back({c.at("estimate").get<double>(), c.at("se").get<double>(),
                                c.at("ci").at(0).get<double>(), c.at("ci").at(1).get<double>()});
    }
    for (const auto& t : j.at("tests")) {
      b.tests.push_back({t.at("coefficient").get<std::size_t>(), t.at("null").get<double>(),
                         t.at("p_value").get<double>(), t.at("degenerate").get<bool>()});
    }
    b.n_star_mean = j.at("n_star").at("mean").get<double>();
    b.n_star_expected = j.at("n_star").at("expected").get<double>();
    b.replicates = j.at("replicates").at("attempted").get<std::size_t>();
    b.failed_replicates = j.at("replicates").at("failed").get<std::size_t>();
    b.exact = j.at("replicates").at("exact").get<bool>();
    b.warnings = j.at("warnings").get<std::vector<std::string>>();
    b.config = j.at("config");
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("result bundle: ") + e.what());
  }
}

std::string dump(const Json& json) { return json.dump(2) + "\n"; }

std::string table_csv(const TableResult& result) {
  std::size_t p = 0;
  for (const auto& row : result.rows) p = std::max(p, static_cast<std::size_t>(row.root_mse.size()));
  std::string out = "scenario,variant,block,failures,modal_selected";
  for (std::size_t j = 0; j < p; ++j) {
    const std::string b = "_b" + std::to_string(j);
    out += ",root_mse" + b + ",coverage" + b + ",mean_estimate" + b + ",true_variance" + b;
  }
  out += "\n";
  for (const auto& row : result.rows) {
    out += csv_field(row.scenario) + "," + std::string(to_string(row.variant)) + "," + format_number(row.block) + "," +
           std::to_string(row.failures) + "," + (row.modal_selected ? "1" : "0");
    for (std::size_t j = 0; j < p; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      if (jj < row.root_mse.size()) {
        out += "," + format_number(row.root_mse[jj]) + "," + format_number(row.coverage[jj]) + "," +
               format_number(row.mean_estimate[jj]) + "," + format_number(row.true_variance[jj]);
      } else {
        out += ",,,,";
      }
    }
    out += "\n";
  }
  return out;
}

std::string boxplot_csv(const TableResult& result) {
  std::size_t p = 0;
  for (const auto& e : result.boxplot) p = std::max(p, e.component + 1);
  std::string out = "scenario,variant,block,sample";
  for (std::size_t j = 0; j < p; ++j) out += ",estimate_b" + std::to_string(j);
  out += "\n";
  std::size_t i = 0;
  while (i < result.boxplot.size()) {
    const auto& first = result.boxplot[i];
    std::vector<std::string> values(p);
    std::size_t k = i;
    while (k < result.boxplot.size() && result.boxplot[k].scenario == first.scenario &&
           result.boxplot[k].variant == first.variant && result.boxplot[k].block == first.block &&
           result.boxplot[k].sample == first.sample) {
      values[result.boxplot[k].component] = format_number(result.boxplot[k].estimate);
      ++k;
    }
    out += csv_field(first.scenario) + "," + std::string(to_string(first.variant)) + "," + format_number(first.block) +
           "," + std::to_string(first.sample);
    for (const auto& v : values) out += "," + v;
    out += "\n";
    i = k;
  }
  return out;
}

std::string demo_csv(const DemoReport& report) {
  std::string out = "block,sample,dssbb,gbbb\n";
  for (const auto& block : report.blocks) {
    for (std::size_t s = 0; s < block.dssbb.size(); ++s) {
      out += format_number(block.block) + "," + std::to_string(s) + "," + format_number(block.dssbb[s]) + "," +
             format_number(block.gbbb[s]) + "\n";
    }
  }
  return out;
}

}  // namespace blockboot
