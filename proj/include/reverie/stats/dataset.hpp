#pragma once

// Trial data files: participants.csv (id,group,age,gender), scales.csv in
// long format (id,timepoint,instrument,item_index,value) and vas.csv
// (id,day,vas). Ingestion is strict; every rejection names file, row and
// column.

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>
#include <string>
#include <vector>

#include "reverie/stats/lmm.hpp"
#include "reverie/stats/scales.hpp"

namespace reverie::stats {

class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::string& file, std::size_t row, const std::string& column, const std::string& msg)
      : std::runtime_error(file + ":" + std::to_string(row) + (column.empty() ? "" : " [" + column + "]") + ": " + msg),
        file_(file),
        row_(row),
        column_(column) {}
  const std::string& file() const noexcept { return file_; }
  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::string file_;
  std::size_t row_;
  std::string column_;
};

struct Participant {
  std::string id;
  std::string group;  // "intervention" or "control"
  double age = 0.0;
  std::string gender;
  bool operator==(const Participant&) const = default;
};

struct ScaleResponse {
  std::string id;
  std::string timepoint;  // "T0" or "T2"
  std::string instrument;
  std::vector<int> item_values;
  bool operator==(const ScaleResponse&) const = default;
};

struct TrialDataset {
  std::vector<Participant> participants;
  std::vector<ScaleResponse> scale_responses;
  std::vector<VasRecord> vas_records;

  std::map<std::string, int> group_indicator() const {
    std::map<std::string, int> g;
    for (const auto& p : participants) g[p.id] = p.group == "intervention" ? 1 : 0;
    return g;
  }
  const ScaleResponse* find(const std::string& id, const std::string& timepoint, const std::string& instrument) const {
    for (const auto& r : scale_responses) {
      if (r.id == id && r.timepoint == timepoint && r.instrument == instrument) return &r;
    }
    return nullptr;
  }
  bool operator==(const TrialDataset&) const = default;
};

/// Checks cross-table invariants; throws std::invalid_argument.
inline void validate(const TrialDataset& ds) {
  std::set<std::string> ids;
  for (const auto& p : ds.participants) {
    if (!ids.insert(p.id).second) throw std::invalid_argument("duplicate participant " + p.id);
    if (p.group != "intervention" && p.group != "control") throw std::invalid_argument("bad group for " + p.id);
  }
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (const auto& r : ds.scale_responses) {
    if (!ids.count(r.id)) throw std::invalid_argument("scale response for unknown participant " + r.id);
    if (r.timepoint != "T0" && r.timepoint != "T2") throw std::invalid_argument("bad timepoint " + r.timepoint);
    try {
      check_items(instrument_spec(r.instrument), r.item_values);
    } catch (const StatsError& e) {
      throw std::invalid_argument(r.id + " " + r.timepoint + ": " + e.what());
    }
    if (!seen.insert({r.id, r.timepoint, r.instrument}).second) {
      throw std::invalid_argument("duplicate " + r.instrument + " response for " + r.id + " at " + r.timepoint);
    }
  }
  for (const auto& v : ds.vas_records) {
    if (!ids.count(v.id)) throw std::invalid_argument("vas record for unknown participant " + v.id);
    if (v.day < 1 || v.day > 14) throw std::invalid_argument("vas day out of range for " + v.id);
    if (v.vas < 0.0 || v.vas > 10.0) throw std::invalid_argument("vas value out of range for " + v.id);
  }
}

namespace detail {

using CsvRow = std::vector<std::string>;

// RFC 4180 fields: quotes allowed, embedded newlines not.
inline CsvRow split_csv_line(const std::string& line, const std::string& file, std::size_t row) {
  CsvRow out;
  std::string cur;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      if (!cur.empty() || was_quoted) throw DatasetError(file, row, "", "stray quote");
      quoted = was_quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
      was_quoted = false;
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  if (quoted) throw DatasetError(file, row, "", "unterminated quote");
  out.push_back(std::move(cur));
  return out;
}

struct CsvTable {
  std::string file;
  std::vector<CsvRow> rows;  // without header
  std::vector<std::size_t> line;  // 1-based file line of each row
  std::map<std::string, std::size_t> column;
  const std::string& cell(std::size_t r, const std::string& col) const { return rows[r][column.at(col)]; }
};

inline CsvTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& required) {
  CsvTable t;
  t.file = path.filename().string();
  std::ifstream in(path);
  if (!in) throw DatasetError(t.file, 0, "", "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DatasetError(t.file, 1, "", "missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line, t.file, 1);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!t.column.emplace(header[i], i).second) throw DatasetError(t.file, 1, header[i], "duplicate column");
  }
  for (const auto& col : required) {
    if (!t.column.count(col)) throw DatasetError(t.file, 1, col, "required column missing");
  }
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line, t.file, row);
    if (fields.size() != header.size()) {
      throw DatasetError(t.file, row, "", "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
    t.line.push_back(row);
  }
  return t;
}

template <typename T>
T parse_number(const std::string& s, const std::string& file, std::size_t row, const std::string& col) {
  std::istringstream is(s);
  T v{};
  if (s.empty() || !(is >> v) || !(is >> std::ws).eof()) throw DatasetError(file, row, col, "not a number: '" + s + "'");
  return v;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

}  // namespace detail

inline TrialDataset load_dataset(const std::filesystem::path& dir) {
  using detail::parse_number;
  TrialDataset ds;
  std::set<std::string> ids;

  const auto pt = detail::read_csv(dir / "participants.csv", {"id", "group", "age", "gender"});
  for (std::size_t r = 0; r < pt.rows.size(); ++r) {
    const std::size_t line = pt.line[r];
    Participant p;
    p.id = pt.cell(r, "id");
    if (p.id.empty()) throw DatasetError(pt.file, line, "id", "empty id");
    if (!ids.insert(p.id).second) throw DatasetError(pt.file, line, "id", "duplicate participant " + p.id);
    p.group = pt.cell(r, "group");
    if (p.group != "intervention" && p.group != "control") {
      throw DatasetError(pt.file, line, "group", "expected intervention or control, got '" + p.group + "'");
    }
    p.age = parse_number<double>(pt.cell(r, "age"), pt.file, line, "age");
    p.gender = pt.cell(r, "gender");
    ds.participants.push_back(std::move(p));
  }

  const auto st = detail::read_csv(dir / "scales.csv", {"id", "timepoint", "instrument", "item_index", "value"});
  struct Pending {
    std::map<int, int> items;
    std::size_t first_row = 0;
  };
  std::map<std::tuple<std::string, std::string, std::string>, Pending> grouped;
  for (std::size_t r = 0; r < st.rows.size(); ++r) {
    const std::size_t line = st.line[r];
    const auto& id = st.cell(r, "id");
    if (!ids.count(id)) throw DatasetError(st.file, line, "id", "unknown participant " + id);
    const auto& tp = st.cell(r, "timepoint");
    if (tp != "T0" && tp != "T2") throw DatasetError(st.file, line, "timepoint", "expected T0 or T2, got '" + tp + "'");
    const auto& inst = st.cell(r, "instrument");
    const InstrumentSpec* spec = nullptr;
    try {
      spec = &instrument_spec(inst);
    } catch (const std::invalid_argument&) {
      throw DatasetError(st.file, line, "instrument", "unknown instrument '" + inst + "'");
    }
    const int idx = parse_number<int>(st.cell(r, "item_index"), st.file, line, "item_index");
    if (idx < 1 || idx > spec->items) {
      throw DatasetError(st.file, line, "item_index", "item " + std::to_string(idx) + " outside 1.." + std::to_string(spec->items) + " for " + inst);
    }
    const int value = parse_number<int>(st.cell(r, "value"), st.file, line, "value");
    if (value < spec->min_value || value > spec->max_value) {
      throw DatasetError(st.file, line, "value", std::to_string(value) + " outside " + inst + " range");
    }
    auto& pend = grouped[{id, tp, inst}];
    if (pend.items.empty()) pend.first_row = line;
    if (!pend.items.emplace(idx, value).second) throw DatasetError(st.file, line, "item_index", "duplicate item " + std::to_string(idx));
  }
  for (auto& [key, pend] : grouped) {
    const auto& [id, tp, inst] = key;
    const auto& spec = instrument_spec(inst);
    if (static_cast<int>(pend.items.size()) != spec.items) {
      throw DatasetError(st.file, pend.first_row, "item_index",
                         inst + " for " + id + " at " + tp + " has " + std::to_string(pend.items.size()) + " of " +
                             std::to_string(spec.items) + " items");
    }
    ScaleResponse resp{id, tp, inst, {}};
    for (const auto& [i, v] : pend.items) resp.item_values.push_back(v);
    ds.scale_responses.push_back(std::move(resp));
  }

  const auto vas_path = dir / "vas.csv";
  if (std::filesystem::exists(vas_path)) {
    const auto vt = detail::read_csv(vas_path, {"id", "day", "vas"});
    for (std::size_t r = 0; r < vt.rows.size(); ++r) {
      const std::size_t line = vt.line[r];
      VasRecord v;
      v.id = vt.cell(r, "id");
      if (!ids.count(v.id)) throw DatasetError(vt.file, line, "id", "unknown participant " + v.id);
      v.day = parse_number<int>(vt.cell(r, "day"), vt.file, line, "day");
      if (v.day < 1 || v.day > 14) throw DatasetError(vt.file, line, "day", "day must be within 1..14");
      v.vas = parse_number<double>(vt.cell(r, "vas"), vt.file, line, "vas");
      if (v.vas < 0.0 || v.vas > 10.0) throw DatasetError(vt.file, line, "vas", "vas must be within 0..10");
      ds.vas_records.push_back(std::move(v));
    }
  }
  return ds;
}

inline void write_dataset(const TrialDataset& ds, const std::filesystem::path& dir) {
  using detail::csv_field;
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    return out;
  };
  auto num = [](double v) { return nlohmann::json(v).dump(); };
  {
    auto out = open("participants.csv");
    out << "id,group,age,gender\n";
    for (const auto& p : ds.participants) {
      out << csv_field(p.id) << ',' << p.group << ',' << num(p.age) << ',' << csv_field(p.gender) << '\n';
    }
  }
  {
    auto out = open("scales.csv");
    out << "id,timepoint,instrument,item_index,value\n";
    for (const auto& r : ds.scale_responses) {
      for (std::size_t i = 0; i < r.item_values.size(); ++i) {
        out << csv_field(r.id) << ',' << r.timepoint << ',' << r.instrument << ',' << i + 1 << ',' << r.item_values[i] << '\n';
      }
    }
  }
  {
    auto out = open("vas.csv");
    out << "id,day,vas\n";
    for (const auto& v : ds.vas_records) out << csv_field(v.id) << ',' << v.day << ',' << num(v.vas) << '\n';
  }
}

}  // namespace reverie::stats
