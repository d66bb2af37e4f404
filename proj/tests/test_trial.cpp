#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "reverie/stats/analysis.hpp"
#include "reverie/stats/dataset.hpp"
#include "reverie/stats/synthetic.hpp"

using namespace reverie::stats;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("reverie_trial_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void put(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Minimal valid directory: two participants, complete pss10 at both points.
void write_minimal(const fs::path& dir) {
  put(dir / "participants.csv", "id,group,age,gender\nI01,intervention,22,female\nC01,control,21,male\n");
  std::string scales = "id,timepoint,instrument,item_index,value\n";
  for (const char* id : {"I01", "C01"}) {
    for (const char* tp : {"T0", "T2"}) {
      for (int i = 1; i <= 10; ++i) scales += std::string(id) + "," + tp + ",pss10," + std::to_string(i) + ",2\n";
    }
  }
  put(dir / "scales.csv", scales);
  put(dir / "vas.csv", "id,day,vas\nI01,1,7.5\nC01,1,8\n");
}

void expect_error(const fs::path& dir, const std::string& file, std::size_t row, const std::string& column,
                  const std::string& fragment) {
  try {
    load_dataset(dir);
    FAIL() << "expected DatasetError containing " << fragment;
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.file(), file) << e.what();
    EXPECT_EQ(e.row(), row) << e.what();
    EXPECT_EQ(e.column(), column) << e.what();
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

}  // namespace

TEST(Dataset, WriteLoadRoundTrip) {
  TempDir tmp("roundtrip");
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    const auto ds = generate_trial_dataset(seed);
    EXPECT_NO_THROW(validate(ds));
    write_dataset(ds, tmp.path);
    const auto back = load_dataset(tmp.path);
    EXPECT_EQ(back, ds) << "seed " << seed;
  }
}

TEST(Dataset, QuotedFieldsAndBlankLines) {
  TempDir tmp("quoted");
  write_minimal(tmp.path);
  put(tmp.path / "participants.csv",
      "id,group,age,gender\r\n\"I01\",intervention,22,\"non-binary, other\"\r\n\r\nC01,control,21,\"says \"\"m\"\"\"\n");
  const auto ds = load_dataset(tmp.path);
  ASSERT_EQ(ds.participants.size(), 2u);
  EXPECT_EQ(ds.participants[0].gender, "non-binary, other");
  EXPECT_EQ(ds.participants[1].gender, "says \"m\"");

  TempDir out("quoted_out");
  write_dataset(ds, out.path);
  EXPECT_EQ(load_dataset(out.path), ds);
}

TEST(Dataset, VasFileOptional) {
  TempDir tmp("novas");
  write_minimal(tmp.path);
  fs::remove(tmp.path / "vas.csv");
  EXPECT_TRUE(load_dataset(tmp.path).vas_records.empty());
}

TEST(Dataset, ErrorsCarryFileRowColumn) {
  TempDir tmp("errors");
  const auto reset = [&] { write_minimal(tmp.path); };

  reset();
  put(tmp.path / "participants.csv", "");
  expect_error(tmp.path, "participants.csv", 1, "", "missing header row");

  reset();
  put(tmp.path / "participants.csv", "id,group,age\nI01,intervention,22\n");
  expect_error(tmp.path, "participants.csv", 1, "gender", "required column missing");

  reset();
  put(tmp.path / "participants.csv", "id,group,age,gender,age\nI01,intervention,22,f,22\n");
  expect_error(tmp.path, "participants.csv", 1, "age", "duplicate column");

  reset();
  put(tmp.path / "participants.csv", "id,group,age,gender\nI01,intervention,22,f\n\nC01,control,abc,m\n");
  expect_error(tmp.path, "participants.csv", 4, "age", "not a number");

  reset();
  put(tmp.path / "participants.csv", "id,group,age,gender\nI01,treatment,22,f\n");
  expect_error(tmp.path, "participants.csv", 2, "group", "expected intervention or control");

  reset();
  put(tmp.path / "participants.csv", "id,group,age,gender\nI01,intervention,22,f\nI01,control,21,m\n");
  expect_error(tmp.path, "participants.csv", 3, "id", "duplicate participant");

  reset();
  put(tmp.path / "participants.csv", "id,group,age,gender\nI01,intervention,22\n");
  expect_error(tmp.path, "participants.csv", 2, "", "expected 4 fields, got 3");

  reset();
  put(tmp.path / "participants.csv", "id,group,age,gender\nI01,intervention,22,\"f\n");
  expect_error(tmp.path, "participants.csv", 2, "", "unterminated quote");

  reset();
  put(tmp.path / "participants.csv", "id,group,age,gender\nI01,intervention,22,f\"x\"\n");
  expect_error(tmp.path, "participants.csv", 2, "", "stray quote");

  reset();
  put(tmp.path / "participants.csv", "id,group,age,gender\nI01,intervention,22.5x,f\n");
  expect_error(tmp.path, "participants.csv", 2, "age", "not a number");

  reset();
  put(tmp.path / "scales.csv", "id,timepoint,instrument,item_index,value\nX99,T0,pss10,1,2\n");
  expect_error(tmp.path, "scales.csv", 2, "id", "unknown participant");

  reset();
  put(tmp.path / "scales.csv", "id,timepoint,instrument,item_index,value\nI01,T1,pss10,1,2\n");
  expect_error(tmp.path, "scales.csv", 2, "timepoint", "expected T0 or T2");

  reset();
  put(tmp.path / "scales.csv", "id,timepoint,instrument,item_index,value\nI01,T0,bdi,1,2\n");
  expect_error(tmp.path, "scales.csv", 2, "instrument", "unknown instrument");

  reset();
  put(tmp.path / "scales.csv", "id,timepoint,instrument,item_index,value\nI01,T0,pss10,11,2\n");
  expect_error(tmp.path, "scales.csv", 2, "item_index", "outside 1..10");

  reset();
  put(tmp.path / "scales.csv", "id,timepoint,instrument,item_index,value\nI01,T0,pss10,1,5\n");
  expect_error(tmp.path, "scales.csv", 2, "value", "outside pss10 range");

  reset();
  put(tmp.path / "scales.csv", "id,timepoint,instrument,item_index,value\nI01,T0,pss10,1,2\nI01,T0,pss10,1,3\n");
  expect_error(tmp.path, "scales.csv", 3, "item_index", "duplicate item 1");

  reset();
  put(tmp.path / "scales.csv",
      "id,timepoint,instrument,item_index,value\nI01,T0,pss10,1,2\n\nI01,T2,pss10,1,2\nI01,T2,pss10,2,2\n");
  expect_error(tmp.path, "scales.csv", 2, "item_index", "has 1 of 10 items");

  reset();
  put(tmp.path / "vas.csv", "id,day,vas\nI01,1,7\nI01,15,7\n");
  expect_error(tmp.path, "vas.csv", 3, "day", "within 1..14");

  reset();
  put(tmp.path / "vas.csv", "id,day,vas\nI01,1,10.5\n");
  expect_error(tmp.path, "vas.csv", 2, "vas", "within 0..10");

  reset();
  put(tmp.path / "vas.csv", "id,day,vas\nZ1,1,5\n");
  expect_error(tmp.path, "vas.csv", 2, "id", "unknown participant");

  reset();
  fs::remove(tmp.path / "scales.csv");
  expect_error(tmp.path, "scales.csv", 0, "", "cannot open");
}

TEST(Dataset, ValidateRejectsInconsistentTables) {
  auto ds = generate_trial_dataset(3);
  EXPECT_NO_THROW(validate(ds));

  auto bad = ds;
  bad.participants.push_back(bad.participants.front());
  EXPECT_THROW(validate(bad), std::invalid_argument);

  bad = ds;
  bad.participants.front().group = "placebo";
  EXPECT_THROW(validate(bad), std::invalid_argument);

  bad = ds;
  bad.scale_responses.front().id = "nobody";
  EXPECT_THROW(validate(bad), std::invalid_argument);

  bad = ds;
  bad.scale_responses.push_back(bad.scale_responses.front());
  EXPECT_THROW(validate(bad), std::invalid_argument);

  bad = ds;
  bad.scale_responses.front().item_values.pop_back();
  EXPECT_THROW(validate(bad), std::invalid_argument);

  bad = ds;
  bad.vas_records.front().day = 0;
  EXPECT_THROW(validate(bad), std::invalid_argument);

  bad = ds;
  bad.vas_records.front().vas = -0.1;
  EXPECT_THROW(validate(bad), std::invalid_argument);
}

TEST(Analysis, SyntheticTrialShowsExpectedDirections) {
  const auto ds = generate_trial_dataset(11);
  const auto rep = analyze_trial(ds);
  EXPECT_EQ(rep.participants, 20);
  EXPECT_EQ(rep.intervention_n, 10);
  EXPECT_EQ(rep.control_n, 10);

  ASSERT_FALSE(rep.pss_ancova.skipped) << rep.pss_ancova.reason;
  EXPECT_EQ(rep.pss_ancova.observations, 20);
  EXPECT_EQ(rep.pss_ancova.fit.inference, "t");
  EXPECT_LT(rep.pss_ancova.fit.coef("group"), 0.0);

  ASSERT_FALSE(rep.vas_lmm.skipped) << rep.vas_lmm.reason;
  EXPECT_EQ(rep.vas_lmm.observations, 20 * 14);
  EXPECT_LT(rep.vas_lmm.fit.coef("group:day"), 0.0);
  EXPECT_EQ(rep.vas_lmm.fit.dof, 0.0);

  ASSERT_EQ(rep.pss_paired.size(), 2u);
  EXPECT_EQ(rep.pss_paired[0].group, "intervention");
  EXPECT_TRUE(rep.pss_paired[0].computed);
  EXPECT_LT(rep.pss_paired[0].mean_t2, rep.pss_paired[0].mean_t0);

  EXPECT_EQ(rep.cerq_change.size(), 9u);
  EXPECT_FALSE(rep.paesis.skipped);
  EXPECT_EQ(rep.paesis.persons, 10);
  EXPECT_FALSE(rep.sus.skipped);
  EXPECT_EQ(rep.sus.n, 10);
  EXPECT_GE(rep.sus.total_median, rep.sus.total_min);
  EXPECT_LE(rep.sus.total_median, rep.sus.total_max);

  // Descriptives agree with a direct recomputation for one cell.
  double sum = 0.0;
  int n = 0;
  for (const auto& r : ds.scale_responses) {
    if (r.instrument == "pss10" && r.timepoint == "T2" && ds.group_indicator().at(r.id) == 0) {
      sum += score_pss10(r.item_values);
      ++n;
    }
  }
  const auto* d = detail::find_descriptive(rep, "pss10", "total", "control", "T2");
  ASSERT_NE(d, nullptr);
  EXPECT_EQ(d->n, n);
  EXPECT_NEAR(d->mean, sum / n, 1e-12);
}

TEST(Analysis, EmptyDailyRatingsAreSkipped) {
  auto ds = generate_trial_dataset(5);
  ds.vas_records.clear();
  const auto rep = analyze_trial(ds);
  EXPECT_TRUE(rep.vas_lmm.skipped);
  EXPECT_EQ(rep.vas_lmm.reason, "no daily ratings");
  EXPECT_EQ(rep.vas_lmm.observations, 0);
  EXPECT_FALSE(rep.pss_ancova.skipped);
  EXPECT_NE(render_markdown(rep).find("no daily ratings"), std::string::npos);
}

TEST(Analysis, ControlOnlyResponsesSkipSections) {
  auto ds = generate_trial_dataset(8);
  std::erase_if(ds.scale_responses, [](const ScaleResponse& r) { return r.instrument == "sus" || r.instrument == "paesis"; });
  const auto rep = analyze_trial(ds);
  EXPECT_TRUE(rep.sus.skipped);
  EXPECT_TRUE(rep.paesis.skipped);
  EXPECT_FALSE(rep.paesis.reason.empty());
}

TEST(Analysis, ReportJsonRoundTripAndFiles) {
  const auto rep = analyze_trial(generate_trial_dataset(21), 0.01);
  const nlohmann::json j = rep;
  const auto back = nlohmann::json::parse(j.dump()).get<AnalysisReport>();
  EXPECT_EQ(back, rep);
  EXPECT_EQ(back.alpha_level, 0.01);

  TempDir tmp("report");
  write_report(rep, tmp.path / "nested");
  std::ifstream in(tmp.path / "nested" / "report.json");
  ASSERT_TRUE(in);
  EXPECT_EQ(nlohmann::json::parse(in).get<AnalysisReport>(), rep);
  std::ifstream md(tmp.path / "nested" / "report.md");
  const std::string text((std::istreambuf_iterator<char>(md)), std::istreambuf_iterator<char>());
  EXPECT_NE(text.find("group:day"), std::string::npos);
  EXPECT_NE(text.find("Cronbach"), std::string::npos);
}

TEST(Analysis, DeterministicForSeed) {
  EXPECT_EQ(analyze_trial(generate_trial_dataset(4)), analyze_trial(generate_trial_dataset(4)));
  EXPECT_NE(generate_trial_dataset(4), generate_trial_dataset(5));
}
