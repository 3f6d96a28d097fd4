// Data-format tests: JSONL loaders with line/field diagnostics, the
// deterministic writers, round-trip invariants, and the tabular exports.
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "idealband/data_io.hpp"

using namespace idealband;

namespace {

namespace fs = std::filesystem;

fs::path scratch_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() /
             ("idealband_data_io_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

fs::path write_file(const std::string& name, const std::string& content) {
  const auto path = scratch_dir() / name;
  std::ofstream(path, std::ios::binary) << content;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::stringstream stream(text);
  std::string line;
  while (std::getline(stream, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> columns_of(const std::string& line) {
  std::vector<std::string> cols;
  std::stringstream stream(line);
  std::string col;
  while (std::getline(stream, col, '\t')) cols.push_back(col);
  return cols;
}

ItemBank sample_bank() {
  ItemBank bank;
  ItemRecord cap;
  cap.id = "c1";
  cap.kind = ItemKind::Capability;
  cap.capability = {0.75, 1.25};
  cap.metadata.dataset = "math";
  bank.index.emplace(cap.id, bank.items.size());
  bank.items.push_back(cap);

  ItemRecord two;
  two.id = "p1";
  two.kind = ItemKind::Propensity;
  two.window = PropensityWindow{-1.5, 2.0, 1.0};
  two.metadata.dataset = "survey";
  two.metadata.propensity_name = "risk tolerance";
  two.metadata.question_text = "Choose a lottery.";
  bank.index.emplace(two.id, bank.items.size());
  bank.items.push_back(two);

  ItemRecord open_low;
  open_low.id = "p2";
  open_low.kind = ItemKind::Propensity;
  open_low.window = PropensityWindow{std::nullopt, 0.5, 2.0};
  bank.index.emplace(open_low.id, bank.items.size());
  bank.items.push_back(open_low);

  ItemRecord open_high;
  open_high.id = "p3";
  open_high.kind = ItemKind::Propensity;
  open_high.window = PropensityWindow{1.0, std::nullopt, 1.0};
  bank.index.emplace(open_high.id, bank.items.size());
  bank.items.push_back(open_high);
  return bank;
}

}  // namespace

TEST_CASE("item bank round-trip") {
  const auto path = scratch_dir() / "bank.jsonl";
  const ItemBank bank = sample_bank();
  write_item_bank(path, bank);
  const ItemBank loaded = load_item_bank(path);

  REQUIRE(loaded.items.size() == bank.items.size());
  CHECK(loaded.items[0].kind == ItemKind::Capability);
  CHECK(loaded.items[0].capability.difficulty_b == 0.75);
  CHECK(loaded.items[0].capability.discrimination_a == 1.25);
  CHECK(loaded.items[0].metadata.dataset == "math");

  CHECK(loaded.items[1].kind == ItemKind::Propensity);
  CHECK(*loaded.items[1].window.lower_bl == -1.5);
  CHECK(*loaded.items[1].window.upper_bu == 2.0);
  CHECK(loaded.items[1].metadata.propensity_name == "risk tolerance");
  REQUIRE(loaded.items[1].metadata.question_text.has_value());
  CHECK(*loaded.items[1].metadata.question_text == "Choose a lottery.");

  CHECK_FALSE(loaded.items[2].window.lower_bl.has_value());
  CHECK(*loaded.items[2].window.upper_bu == 0.5);
  CHECK(loaded.items[2].window.base_discrimination_a == 2.0);
  CHECK(*loaded.items[3].window.lower_bl == 1.0);
  CHECK_FALSE(loaded.items[3].window.upper_bu.has_value());

  CHECK(loaded.find("p2") != nullptr);
  CHECK(loaded.find("p2")->id == "p2");
  CHECK(loaded.find("nope") == nullptr);

  SUBCASE("write -> load -> write is byte-identical") {
    const auto again = scratch_dir() / "bank_again.jsonl";
    write_item_bank(again, loaded);
    CHECK(slurp(again) == slurp(path));
  }

  SUBCASE("infinite bounds are written as tokens") {
    const auto text = slurp(path);
    CHECK(text.find("\"-inf\"") != std::string::npos);
    CHECK(text.find("\"+inf\"") != std::string::npos);
  }
}

TEST_CASE("item bank schema diagnostics") {
  SUBCASE("invalid JSON names the line") {
    const auto path = write_file(
        "bad_json.jsonl",
        R"({"id":"a","kind":"capability","b":0,"a":1})" "\n" "{oops\n");
    try {
      load_item_bank(path);
      FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
      CHECK(e.line == 2);
      CHECK(e.field == "json");
    }
  }

  SUBCASE("blank lines are skipped but keep real line numbers") {
    const auto path = write_file(
        "blank.jsonl",
        R"({"id":"a","kind":"capability","b":0,"a":1})" "\n\n" "[1,2]\n");
    try {
      load_item_bank(path);
      FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
      CHECK(e.line == 3);
      CHECK(e.field == "json");
    }
  }

  SUBCASE("out-of-order bounds name the bounds field and line") {
    std::string content;
    for (int i = 0; i < 6; ++i) {
      content += R"({"id":"w)" + std::to_string(i) +
                 R"(","kind":"propensity","b_l":0,"b_u":2,"a":1})" "\n";
    }
    content += R"({"id":"w6","kind":"propensity","b_l":3,"b_u":1,"a":1})" "\n";
    const auto path = write_file("order.jsonl", content);
    try {
      load_item_bank(path);
      FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
      CHECK(e.line == 7);
      CHECK(e.field == "bounds");
    }
  }

  SUBCASE("duplicate ids carry line and id") {
    const auto path = write_file(
        "dup.jsonl",
        R"({"id":"a","kind":"capability","b":0,"a":1})" "\n"
        R"({"id":"a","kind":"capability","b":1,"a":1})" "\n");
    try {
      load_item_bank(path);
      FAIL("expected DuplicateId");
    } catch (const DuplicateId& e) {
      CHECK(e.line == 2);
      CHECK(e.id == "a");
    }
  }

  SUBCASE("infinity tokens only fit their own side") {
    const auto lower_ok = write_file(
        "inf_ok.jsonl",
        R"({"id":"a","kind":"propensity","b_l":"-inf","b_u":0,"a":1})" "\n");
    CHECK_NOTHROW(load_item_bank(lower_ok));

    const auto wrong_side = write_file(
        "inf_bad.jsonl",
        R"({"id":"a","kind":"propensity","b_l":"+inf","b_u":0,"a":1})" "\n");
    try {
      load_item_bank(wrong_side);
      FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
      CHECK(e.line == 1);
      CHECK(e.field == "b_l");
    }
  }

  SUBCASE("both bounds infinite is degenerate") {
    const auto path = write_file(
        "no_bounds.jsonl",
        R"({"id":"a","kind":"propensity","b_l":"-inf","b_u":"+inf","a":1})" "\n");
    CHECK_THROWS_AS(load_item_bank(path), SchemaError);
  }

  SUBCASE("unknown kind, bad discrimination, missing fields") {
    CHECK_THROWS_AS(
        load_item_bank(write_file(
            "kind.jsonl", R"({"id":"a","kind":"magic","b":0,"a":1})" "\n")),
        SchemaError);
    CHECK_THROWS_AS(
        load_item_bank(write_file(
            "nega.jsonl",
            R"({"id":"a","kind":"capability","b":0,"a":-1})" "\n")),
        SchemaError);
    CHECK_THROWS_AS(
        load_item_bank(write_file(
            "nob.jsonl", R"({"id":"a","kind":"capability","a":1})" "\n")),
        SchemaError);
    CHECK_THROWS_AS(load_item_bank(scratch_dir() / "does_not_exist.jsonl"),
                    IoError);
  }
}

TEST_CASE("outcome rows") {
  const ItemBank bank = sample_bank();
  const std::vector<OutcomeRow> rows{
      {"agent1", "c1", 1, std::nullopt},
      {"agent1", "p1", 0, 2},
      {"agent2", "p2", 1, -3},
  };
  const auto path = scratch_dir() / "outcomes.jsonl";
  write_outcomes(path, rows);
  const auto loaded = load_outcomes(path, bank);

  REQUIRE(loaded.size() == 3);
  CHECK(loaded[0].agent_id == "agent1");
  CHECK(loaded[0].item_id == "c1");
  CHECK(loaded[0].y == 1);
  CHECK_FALSE(loaded[0].incitation_level.has_value());
  CHECK(*loaded[1].incitation_level == 2);
  CHECK(*loaded[2].incitation_level == -3);

  SUBCASE("explicit unprompted token loads as absent") {
    const auto p = write_file(
        "unprompted.jsonl",
        R"({"agent_id":"x","item_id":"c1","y":0,"incitation_level":"unprompted"})"
        "\n");
    const auto r = load_outcomes(p, bank);
    REQUIRE(r.size() == 1);
    CHECK_FALSE(r[0].incitation_level.has_value());
  }

  SUBCASE("unknown item and bad fields") {
    try {
      load_outcomes(write_file("bad_item.jsonl",
                               R"({"agent_id":"x","item_id":"zz","y":1})" "\n"),
                    bank);
      FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
      CHECK(e.line == 1);
      CHECK(e.field == "item_id");
    }
    CHECK_THROWS_AS(
        load_outcomes(write_file("bad_y.jsonl",
                                 R"({"agent_id":"x","item_id":"c1","y":2})" "\n"),
                      bank),
        SchemaError);
    CHECK_THROWS_AS(
        load_outcomes(
            write_file(
                "bad_level.jsonl",
                R"({"agent_id":"x","item_id":"c1","y":1,"incitation_level":4})"
                "\n"),
            bank),
        SchemaError);
  }
}

TEST_CASE("instance rows") {
  std::vector<InstanceFeatures> instances(2);
  for (std::size_t k = 0; k < 2; ++k) {
    auto& inst = instances[k];
    inst.id = "inst" + std::to_string(k);
    for (std::size_t d = 0; d < kNumDemandDims; ++d) {
      inst.capability_demands[d] = static_cast<double>((d + k) % 7);
    }
    for (auto& w : inst.propensity_windows) {
      w = PropensityWindow{-1.0, 1.0, 1.0};
    }
    inst.label = static_cast<int>(k);
  }
  instances[1].propensity_windows[0] = PropensityWindow{std::nullopt, 2.0, 1.0};
  instances[1].propensity_windows[2] = PropensityWindow{0.0, std::nullopt, 1.0};

  const auto path = scratch_dir() / "instances.jsonl";
  write_instances(path, instances);
  const auto loaded = load_instances(path);

  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].id == "inst0");
  CHECK(loaded[0].label == 0);
  CHECK(loaded[1].label == 1);
  for (std::size_t d = 0; d < kNumDemandDims; ++d) {
    CHECK(loaded[0].capability_demands[d] == instances[0].capability_demands[d]);
  }
  CHECK_FALSE(loaded[1].propensity_windows[0].lower_bl.has_value());
  CHECK(*loaded[1].propensity_windows[0].upper_bu == 2.0);
  CHECK(*loaded[1].propensity_windows[2].lower_bl == 0.0);
  CHECK_FALSE(loaded[1].propensity_windows[2].upper_bu.has_value());

  SUBCASE("write -> load -> write is byte-identical") {
    const auto again = scratch_dir() / "instances_again.jsonl";
    write_instances(again, loaded);
    CHECK(slurp(again) == slurp(path));
  }

  SUBCASE("demand range and window arity are enforced") {
    std::string demands17 = "[0";
    for (int i = 1; i < 17; ++i) demands17 += ",0";
    demands17 += "]";
    const auto short_row = write_file(
        "short.jsonl", R"({"id":"a","capability_demands":)" + demands17 +
                           R"(,"propensity_windows":[[0,1],[0,1],[0,1],[0,1]],"y":0})"
                           "\n");
    try {
      load_instances(short_row);
      FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
      CHECK(e.field == "capability_demands");
    }

    std::string demands18 = "[6.5";
    for (int i = 1; i < 18; ++i) demands18 += ",0";
    demands18 += "]";
    CHECK_THROWS_AS(
        load_instances(write_file(
            "range.jsonl",
            R"({"id":"a","capability_demands":)" + demands18 +
                R"(,"propensity_windows":[[0,1],[0,1],[0,1],[0,1]],"y":0})"
                "\n")),
        SchemaError);
  }
}

TEST_CASE("annotation request rows") {
  const auto path = write_file(
      "requests.jsonl",
      R"({"id":"q7","propensity_name":"risk tolerance","rubric":"R","question_text":"Q A"})"
      "\n"
      R"({"propensity_name":"introversion","question_text":"Q B","model":"m2","endpoint":"http://x:1","temperature":0.5})"
      "\n");
  const auto rows = load_annotation_requests(path, "default-model",
                                             "http://default:8", 0.0, "DR");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].id == "q7");
  CHECK(rows[0].request.rubric_text == "R");
  CHECK(rows[0].request.model_name == "default-model");
  CHECK(rows[0].request.endpoint == "http://default:8");
  CHECK(rows[0].request.temperature == 0.0);
  CHECK(rows[1].id == "1");  // record index fallback
  CHECK(rows[1].request.rubric_text == "DR");
  CHECK(rows[1].request.model_name == "m2");
  CHECK(rows[1].request.endpoint == "http://x:1");
  CHECK(rows[1].request.temperature == 0.5);

  SUBCASE("a missing rubric needs a default") {
    const auto bare = write_file(
        "bare.jsonl",
        R"({"propensity_name":"x","question_text":"q"})" "\n");
    CHECK_NOTHROW(load_annotation_requests(bare, "m", "e", 0.0, "fallback"));
    try {
      load_annotation_requests(bare, "m", "e", 0.0, "");
      FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
      CHECK(e.line == 1);
      CHECK(e.field == "rubric");
    }
  }
}

TEST_CASE("annotation result rows") {
  AnnotationResult ok;
  ok.status = AnnotationStatus::Ok;
  ok.window = PropensityWindow{-2.0, 1.0, 1.0};
  ok.raw_response = "The propensity range is [-2, 1]";
  ok.cached = true;  // must not leak into the file

  AnnotationResult parse_fail;
  parse_fail.status = AnnotationStatus::ParseFailure;
  parse_fail.error = "no answer";

  AnnotationResult net_fail;
  net_fail.status = AnnotationStatus::NetworkError;
  net_fail.error = "transport: connection refused on socket 55";

  const auto path = scratch_dir() / "ann_results.jsonl";
  write_annotation_results(
      path, {{"q1", ok}, {"q2", parse_fail}, {"q3", net_fail}});
  const auto lines = lines_of(slurp(path));
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == R"({"id":"q1","status":"ok","b_l":-2,"b_u":1})");
  CHECK(lines[1] == R"({"id":"q2","status":"parse_failure"})");
  CHECK(lines[2] == R"({"id":"q3","status":"network_error"})");

  SUBCASE("cold and warm runs write identical bytes") {
    auto warm_ok = ok;
    warm_ok.cached = false;
    const auto other = scratch_dir() / "ann_results_warm.jsonl";
    write_annotation_results(
        other, {{"q1", warm_ok}, {"q2", parse_fail}, {"q3", net_fail}});
    CHECK(slurp(other) == slurp(path));
  }
}

TEST_CASE("response-curve export") {
  const auto path = scratch_dir() / "irc.tsv";
  export_irc(path, PropensityWindow{-2.0, 4.0, 1.0}, -2.0, 4.0, 1.0);
  const auto lines = lines_of(slurp(path));
  REQUIRE(lines.size() == 8);  // header + 7 grid points
  CHECK(lines[0] == "theta\tp_unnorm\tp_naive_norm\tp_final");

  const auto peak = columns_of(lines[4]);  // theta = 1, the midpoint
  REQUIRE(peak.size() == 4);
  CHECK(peak[0] == "1");
  CHECK(peak[1] == "0.907397467092");  // sigma(3)^2 at the base slope
  CHECK(peak[2] == "1");               // naive rescaling peaks at 1 by design
  CHECK(peak[3] == "1");               // the shipped response peaks at 1

  // mirror symmetry shows up as identical printed values
  const auto left = columns_of(lines[2]);   // theta = -1
  const auto right = columns_of(lines[6]);  // theta = 3
  CHECK(left[1] == right[1]);
  CHECK(left[3] == right[3]);

  SUBCASE("one-sided windows fill all three columns with the same curve") {
    const auto one = scratch_dir() / "irc_one.tsv";
    export_irc(one, PropensityWindow{0.0, std::nullopt, 1.0}, -1.0, 1.0, 1.0);
    const auto rows = lines_of(slurp(one));
    REQUIRE(rows.size() == 4);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto cols = columns_of(rows[i]);
      CHECK(cols[1] == cols[2]);
      CHECK(cols[2] == cols[3]);
    }
  }

  SUBCASE("reruns are byte-identical") {
    const auto again = scratch_dir() / "irc_again.tsv";
    export_irc(again, PropensityWindow{-2.0, 4.0, 1.0}, -2.0, 4.0, 1.0);
    CHECK(slurp(again) == slurp(path));
  }

  CHECK_THROWS_AS(
      export_irc(scratch_dir() / "x.tsv", PropensityWindow{-2.0, 4.0, 1.0},
                 -2.0, 4.0, 0.0),
      Error);
}

TEST_CASE("surface exports") {
  const std::vector<PropensityWindow> windows{
      PropensityWindow{-1.0, 1.0, 1.0},
      PropensityWindow{0.0, 4.0, 1.0},
      PropensityWindow{2.0, std::nullopt, 1.0},
  };

  SUBCASE("analytic surface keeps window order and marks one-sided rows") {
    const auto path = scratch_dir() / "surface.tsv";
    export_surface(path, windows, 0.0);
    const auto lines = lines_of(slurp(path));
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == "b_l\tb_u\tm\twidth\tp");
    const auto first = columns_of(lines[1]);
    CHECK(first[0] == "-1");
    CHECK(first[1] == "1");
    CHECK(first[2] == "0");
    CHECK(first[3] == "2");
    CHECK(first[4] == "1");  // theta sits at this window's midpoint
    const auto open = columns_of(lines[3]);
    CHECK(open[1] == "+inf");
    CHECK(open[2] == "NA");
    CHECK(open[3] == "NA");
  }

  SUBCASE("empirical surface pools duplicates and sorts by bounds") {
    const std::vector<PropensityWindow> dupes{
        PropensityWindow{2.0, 3.0, 1.0},
        PropensityWindow{-1.0, 1.0, 1.0},
        PropensityWindow{2.0, 3.0, 1.0},
    };
    const std::vector<OutcomeRecord> ys{{"0", 1}, {"1", 0}, {"2", 0}};
    const auto path = scratch_dir() / "surface_emp.tsv";
    export_surface(path, dupes, ys);
    const auto lines = lines_of(slurp(path));
    REQUIRE(lines.size() == 3);
    const auto first = columns_of(lines[1]);
    CHECK(first[0] == "-1");  // sorted ahead of [2, 3]
    CHECK(first[4] == "0");
    const auto second = columns_of(lines[2]);
    CHECK(second[0] == "2");
    CHECK(second[4] == "0.5");
  }
}

TEST_CASE("pointwise-collapse export") {
  const std::vector<PropensityWindow> windows{
      PropensityWindow{0.0, 2.0, 1.0},
      PropensityWindow{1.0, 3.0, 1.0},
  };
  const std::vector<OutcomeRecord> ys{{"0", 1}, {"1", 0}};
  const auto path = scratch_dir() / "collapse.tsv";
  export_collapse(path, windows, ys, -1.0, 4.0, 1.0);
  const auto lines = lines_of(slurp(path));
  REQUIRE(lines.size() == 7);
  CHECK(lines[0] == "x\tp_emp\tn_cover");
  CHECK(lines[1] == "-1\tNA\t0");     // uncovered
  CHECK(lines[2] == "0\t1\t1");       // only [0, 2]
  CHECK(lines[3] == "1\t0.5\t2");     // both windows
  CHECK(lines[5] == "3\t0\t1");       // only [1, 3]
  CHECK(lines[6] == "4\tNA\t0");
}

TEST_CASE("comparison export") {
  CvResult a;
  a.fold_aurocs = {0.5, 0.75};
  a.mean_auroc = 0.625;
  CvResult b;
  b.fold_aurocs = {1.0, 0.875};
  b.mean_auroc = 0.9375;
  const auto path = scratch_dir() / "cmp.tsv";
  export_comparison(path, {{FeatureSet::CapsOnly, a},
                           {FeatureSet::CapsPlusUltracrep, b}});
  const auto lines = lines_of(slurp(path));
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "feature_set\tmean_auroc\tfold_0\tfold_1");
  CHECK(lines[1] == "caps_only\t0.625\t0.5\t0.75");
  CHECK(lines[2] == "caps_plus_ultracrep\t0.9375\t1\t0.875");
}

TEST_CASE("fit report ordering and formatting") {
  FitResult fit;
  fit.theta_hat = -1.25;
  fit.std_error = 0.5;
  fit.log_likelihood = -10.0;
  fit.n_items = 4;
  fit.converged = true;
  fit.at_bound = false;

  FitResult no_se = fit;
  no_se.std_error = std::nullopt;
  no_se.at_bound = true;

  std::vector<FitReportRow> rows{
      {"b_agent", "d1", 1, fit},
      {"a_agent", "d1", std::nullopt, no_se},
      {"b_agent", "d1", std::nullopt, fit},
      {"a_agent", "d2", -2, fit},
      {"a_agent", "d1", 3, fit},
      {"b_agent", "d1", -1, fit},
  };
  const auto path = scratch_dir() / "report.tsv";
  write_fit_report(path, rows);
  const auto lines = lines_of(slurp(path));
  REQUIRE(lines.size() == 7);
  CHECK(lines[0] ==
        "agent\tdataset\tincitation\ttheta_hat\tstd_error\tlog_likelihood\t"
        "n_items\tconverged\tat_bound");
  // sorted by agent, dataset, unprompted-first incitation
  CHECK(lines[1] == "a_agent\td1\tunprompted\t-1.25\tNA\t-10\t4\ttrue\ttrue");
  CHECK(columns_of(lines[2])[2] == "3");
  CHECK(columns_of(lines[3])[1] == "d2");
  CHECK(lines[4] == "b_agent\td1\tunprompted\t-1.25\t0.5\t-10\t4\ttrue\tfalse");
  CHECK(columns_of(lines[5])[2] == "-1");
  CHECK(columns_of(lines[6])[2] == "1");
}

TEST_CASE("atomic writer") {
  SUBCASE("creates missing parent directories") {
    const auto nested = scratch_dir() / "deep" / "deeper" / "out.txt";
    write_text_atomic(nested, "payload");
    CHECK(slurp(nested) == "payload");
  }

  SUBCASE("leaves no temp file behind") {
    const auto path = scratch_dir() / "atomic.txt";
    write_text_atomic(path, "x");
    CHECK_FALSE(fs::exists(path.string() + ".tmp"));
  }

  SUBCASE("a path through a regular file raises IoError") {
    const auto file = scratch_dir() / "plain.txt";
    write_text_atomic(file, "x");
    CHECK_THROWS_AS(write_text_atomic(file / "child.txt", "y"), IoError);
  }
}
