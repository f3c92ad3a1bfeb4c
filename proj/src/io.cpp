#include "sarscan/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include "json.hpp"
#include <sstream>
#include <unordered_map>

#include "sarscan/error.hpp"

namespace sarscan::io {

using nlohmann::json;

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\"");
  return std::string(s.substr(b, e - b + 1));
}

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

std::vector<CsvRow> split_csv(const std::string& text) {
  std::vector<CsvRow> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  if (text.compare(0, 3, "\xEF\xBB\xBF") == 0) pos = 3;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    if (trim(line).empty() || line.front() == '#') {
      if (end == text.size()) break;
      continue;
    }
    CsvRow row{line_no, {}};
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      row.fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.size() - start : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(row));
    if (end == text.size()) break;
  }
  return rows;
}

std::string where(const std::string& source, std::size_t line) { return source + ":" + std::to_string(line) + ": "; }

double parse_real(const std::string& s, const std::string& source, std::size_t line, const char* what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InputError(where(source, line) + "invalid " + what + " '" + s + "'");
  }
  if (!std::isfinite(v)) throw InputError(where(source, line) + "non-finite " + what);
  return v;
}

std::size_t parse_index(const std::string& s, const std::string& source, std::size_t line) {
  std::size_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InputError(where(source, line) + "invalid site index '" + s + "'");
  }
  return v;
}

std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

}  // namespace

SpatialDataset parse_dataset_csv(const std::string& text, bool allow_missing_values, const std::string& source) {
  const auto rows = split_csv(text);
  if (rows.empty()) throw InputError(source + ": empty dataset file");
  const auto& header = rows.front().fields;
  std::vector<std::string> h;
  for (const auto& f : header) h.push_back(lower(f));
  const bool full = h == std::vector<std::string>{"id", "x", "y", "value"};
  const bool layout = h == std::vector<std::string>{"id", "x", "y"};
  if (!full && !(layout && allow_missing_values)) {
    throw InputError(where(source, rows.front().line) + "expected header 'id,x,y,value'");
  }
  const std::size_t width = full ? 4 : 3;
  std::vector<Site> sites;
  std::vector<double> values;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != width) {
      throw InputError(where(source, row.line) + "expected " + std::to_string(width) + " fields, got " +
                       std::to_string(row.fields.size()));
    }
    if (row.fields[0].empty()) throw InputError(where(source, row.line) + "empty site id");
    sites.push_back({row.fields[0], parse_real(row.fields[1], source, row.line, "x coordinate"),
                     parse_real(row.fields[2], source, row.line, "y coordinate")});
    values.push_back(full ? parse_real(row.fields[3], source, row.line, "value") : 0.0);
  }
  try {
    return SpatialDataset(std::move(sites), std::move(values));
  } catch (const InputError& e) {
    throw InputError(source + ": " + e.what());
  }
}

SpatialDataset read_dataset_csv(const std::filesystem::path& path, bool allow_missing_values) {
  return parse_dataset_csv(read_text(path), allow_missing_values, path.string());
}

SpatialDataset parse_dataset_geojson(const std::string& text, const std::string& value_property,
                                     const std::string& id_property) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("GeoJSON parse error: ") + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features")) {
    throw InputError("GeoJSON input must be a FeatureCollection");
  }
  std::vector<Site> sites;
  std::vector<double> values;
  std::size_t index = 0;
  for (const auto& f : doc.at("features")) {
    const std::string label = "feature " + std::to_string(index);
    const auto& geom = f.at("geometry");
    if (geom.value("type", "") != "Point") throw InputError(label + ": only Point geometries are supported");
    const auto& coords = geom.at("coordinates");
    if (!coords.is_array() || coords.size() < 2 || !coords[0].is_number() || !coords[1].is_number()) {
      throw InputError(label + ": malformed coordinates");
    }
    const json props = f.value("properties", json::object());
    if (!props.contains(value_property) || !props[value_property].is_number()) {
      throw InputError(label + ": missing numeric property '" + value_property + "'");
    }
    std::string id;
    auto id_text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    if (props.contains(id_property) && !props[id_property].is_null()) id = id_text(props[id_property]);
    else if (f.contains("id") && !f["id"].is_null()) id = id_text(f["id"]);
    else id = std::to_string(index);
    sites.push_back({id, coords[0].get<double>(), coords[1].get<double>()});
    values.push_back(props[value_property].get<double>());
    ++index;
  }
  return SpatialDataset(std::move(sites), std::move(values));
}

SpatialDataset read_dataset_geojson(const std::filesystem::path& path, const std::string& value_property,
                                    const std::string& id_property) {
  return parse_dataset_geojson(read_text(path), value_property, id_property);
}

SpatialDataset read_dataset(const std::filesystem::path& path, const std::string& value_property) {
  const std::string ext = lower(path.extension().string());
  if (ext == ".geojson" || ext == ".json") return read_dataset_geojson(path, value_property);
  return read_dataset_csv(path);
}

namespace {

struct EdgeList {
  std::vector<WeightEntry> entries;
};

EdgeList parse_edges(const std::string& text, const SpatialDataset& layout, const std::string& source,
                     bool allow_weight) {
  const auto rows = split_csv(text);
  if (rows.empty()) throw InputError(source + ": empty weights file");
  std::vector<std::string> h;
  for (const auto& f : rows.front().fields) h.push_back(lower(f));
  bool by_id = false;
  if (h.size() >= 2 && h[0] == "i" && h[1] == "j") by_id = false;
  else if (h.size() >= 2 && h[0] == "id_i" && h[1] == "id_j") by_id = true;
  else throw InputError(where(source, rows.front().line) + "expected header 'i,j[,w]' or 'id_i,id_j[,w]'");
  const bool has_w = h.size() == 3 && h[2] == "w";
  if (h.size() > 3 || (h.size() == 3 && !has_w) || (has_w && !allow_weight)) {
    throw InputError(where(source, rows.front().line) + "unexpected columns in header");
  }
  std::unordered_map<std::string, std::size_t> ids;
  for (std::size_t i = 0; i < layout.size(); ++i) ids.emplace(layout.site(i).id, i);

  EdgeList out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != h.size()) {
      throw InputError(where(source, row.line) + "expected " + std::to_string(h.size()) + " fields, got " +
                       std::to_string(row.fields.size()));
    }
    auto site = [&](const std::string& s) -> std::size_t {
      if (by_id) {
        const auto it = ids.find(s);
        if (it == ids.end()) throw InputError(where(source, row.line) + "unknown site id '" + s + "'");
        return it->second;
      }
      const std::size_t v = parse_index(s, source, row.line);
      if (v >= layout.size()) throw InputError(where(source, row.line) + "site index " + s + " out of range");
      return v;
    };
    const std::size_t i = site(row.fields[0]);
    const std::size_t j = site(row.fields[1]);
    if (i == j) throw InputError(where(source, row.line) + "self-loop on site '" + row.fields[0] + "'");
    const double w = has_w ? parse_real(row.fields[2], source, row.line, "weight") : 1.0;
    if (!(w > 0.0)) {
      if (w == 0.0) continue;
      throw InputError(where(source, row.line) + "negative weight");
    }
    out.entries.push_back({i, j, w});
  }
  return out;
}

}  // namespace

WeightsMatrix parse_weights_csv(const std::string& text, const SpatialDataset& layout, const std::string& source) {
  auto edges = parse_edges(text, layout, source, true);
  try {
    return WeightsMatrix::from_entries(layout.size(), std::move(edges.entries), WeightScheme::custom);
  } catch (const InputError& e) {
    throw InputError(source + ": " + e.what());
  }
}

WeightsMatrix read_weights_csv(const std::filesystem::path& path, const SpatialDataset& layout) {
  return parse_weights_csv(read_text(path), layout, path.string());
}

WeightsMatrix parse_contiguity_csv(const std::string& text, const SpatialDataset& layout, const std::string& source) {
  const auto edges = parse_edges(text, layout, source, false);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(edges.entries.size());
  for (const auto& e : edges.entries) pairs.emplace_back(e.row, e.col);
  return build_contiguity(layout.size(), pairs);
}

WeightsMatrix read_contiguity_csv(const std::filesystem::path& path, const SpatialDataset& layout) {
  return parse_contiguity_csv(read_text(path), layout, path.string());
}

std::string weights_csv(const WeightsMatrix& w, const SpatialDataset& layout) {
  std::ostringstream os;
  os << "id_i,id_j,w\n";
  for (const WeightEntry& e : w.entries()) {
    os << layout.site(e.row).id << ',' << layout.site(e.col).id << ',' << format_double(e.value) << '\n';
  }
  return os.str();
}

std::string clusters_csv(std::span<const ClusterReport> reports, const SpatialDataset& ds) {
  std::ostringstream os;
  os << "cluster,n_sites,mean_inside,sd_inside,mean_outside,sd_outside,p_value,statistic,center,radius\n";
  for (const auto& r : reports) {
    os << r.rank << ',' << r.cluster.size() << ',' << format_double(r.mean_inside) << ','
       << format_double(r.sd_inside) << ',' << format_double(r.mean_outside) << ','
       << format_double(r.sd_outside) << ',' << format_double(r.p_value) << ',' << format_double(r.statistic)
       << ',' << ds.site(r.cluster.center).id << ',' << format_double(r.cluster.radius) << '\n';
  }
  return os.str();
}

std::string clusters_json(std::span<const ClusterReport> reports, const SpatialDataset& ds) {
  json arr = json::array();
  for (const auto& r : reports) {
    json members = json::array();
    for (std::size_t m : r.cluster.members) members.push_back(ds.site(m).id);
    arr.push_back({{"rank", r.rank},
                   {"center", ds.site(r.cluster.center).id},
                   {"radius", r.cluster.radius},
                   {"n_sites", r.cluster.size()},
                   {"members", members},
                   {"statistic", r.statistic},
                   {"p_value", r.p_value},
                   {"mean_inside", r.mean_inside},
                   {"sd_inside", r.sd_inside},
                   {"mean_outside", r.mean_outside},
                   {"sd_outside", r.sd_outside}});
  }
  return arr.dump(2) + "\n";
}

}  // namespace sarscan::io
