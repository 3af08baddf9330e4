#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "emglabel/error.hpp"
#include "emglabel/ingest.hpp"
#include "emglabel/pipeline.hpp"

using namespace emglabel;
using namespace emglabel::pipeline;

namespace {

Error error_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected an error");
  return Error(ErrorCode::InternalConsistency, "unreachable");
}

struct Scenario {
  ingest::SyntheticRecording syn;
  PipelineConfig config;
};

Scenario two_actions(int reps, std::uint64_t seed) {
  Scenario s;
  ingest::SyntheticSpec spec;
  spec.actions = {ingest::action_preset("bicep_curl"), ingest::action_preset("lateral_raise")};
  spec.repetitions = reps;
  spec.seed = seed;
  spec.mains_amplitude = 0.3;
  s.syn = ingest::generate_synthetic(spec);
  for (const auto& t : s.syn.truth) {
    s.config.actions.push_back({t.action_name, t.template_series.samples, reps, std::nullopt});
  }
  s.config.seed = seed;
  return s;
}

const Scenario& eight_and_eight() {
  static const Scenario s = two_actions(8, 7);
  return s;
}

const PipelineResult& eight_and_eight_result() {
  static const PipelineResult r = run_pipeline(eight_and_eight().syn.recording, eight_and_eight().config);
  return r;
}

std::string minimal_config(const std::string& action_extra = R"(,"expected_count":1)",
                           const std::string& top_extra = "") {
  return R"({"actions":[{"name":"a","template_samples":[170,120,60,120,170])" + action_extra + "}]" + top_extra +
         "}";
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults mirror the fixed constants") {
    const auto c = parse_config(minimal_config());
    CHECK(c.mdtw.window_factor == 2.0);
    CHECK(c.mdtw.threshold == 0.5);
    CHECK(c.mdtw.max_depth == 3);
    CHECK(c.classifier.folds == 5);
    CHECK(c.classifier.train_fraction == 0.8);
    CHECK(c.actions.size() == 1);
    CHECK(c.seed == 7);
    CHECK(scan_channel(c) == ingest::kElbow);
  }

  TEST_CASE("canonical JSON round trip and hash") {
    const auto c = parse_config(minimal_config(R"(,"expected_count":3,"max_distance":12.5)"));
    const auto text = config_to_json(c);
    const auto back = parse_config(text);
    CHECK(config_to_json(back) == text);
    CHECK(config_hash(back) == config_hash(c));
    CHECK(config_hash(c).size() == 16);
    auto changed = c;
    set_config_value(changed, "mdtw.threshold", "0.25");
    CHECK(changed.mdtw.threshold == 0.25);
    CHECK(config_hash(changed) != config_hash(c));
    set_config_value(changed, "mdtw.local_cost", "squared");
    CHECK(changed.mdtw.local_cost == matching::LocalCost::Squared);
    set_config_value(changed, "actions.0.expected_count", "4");
    CHECK(changed.actions[0].expected_count == 4);
  }

  TEST_CASE("validation names the offending key") {
    const auto check_key = [](const std::string& text, const std::string& key) {
      const auto e = error_of([&] { parse_config(text); });
      CHECK(e.code() == ErrorCode::Config);
      CHECK(std::string(e.what()).find(key) != std::string::npos);
    };
    check_key(minimal_config(R"(,"expected_count":0)"), "actions.0.expected_count");
    check_key(minimal_config(R"(,"expected_count":1)", R"(,"mdtw":{"threshold":1.5})"), "mdtw.threshold");
    check_key(minimal_config(R"(,"expected_count":1)", R"(,"mdtw":{"window_factor":0.5})"), "mdtw.window_factor");
    check_key(minimal_config(R"(,"expected_count":1)", R"(,"filter":{"low_hz":130})"), "filter.low_hz");
    check_key(minimal_config(R"(,"expected_count":1)", R"(,"classifier":{"train_fraction":1.0})"),
              "classifier.train_fraction");
    check_key(minimal_config(R"(,"expected_count":1)", R"(,"mdtw":{"thresold":0.5})"), "mdtw.thresold");
    check_key(minimal_config(""), "actions.0.expected_count");
    check_key(R"({"actions":[]})", "actions");
    check_key(R"({"actions":[{"name":"a","expected_count":1}]})", "actions.0");
    check_key(R"({"actions":[{"name":"a","expected_count":1,"template":"missing.csv"}]})", "actions.0.template");
    check_key(R"({"actions":[{"name":"a","expected_count":1,"template_samples":[1]}]})", "actions.0");
    CHECK(error_of([] { parse_config("{"); }).code() == ErrorCode::Config);
    PipelineConfig c;
    CHECK(error_of([&] { set_config_value(c, "mdtw.max_depth", "0"); }).code() == ErrorCode::Config);
    CHECK(error_of([&] { set_config_value(c, "nosuch.key", "1"); }).code() == ErrorCode::Config);
  }

  TEST_CASE("template files resolve against the config directory") {
    const auto dir = std::filesystem::temp_directory_path() / "emglabel_cfg_test";
    std::filesystem::create_directories(dir / "templates");
    std::ofstream(dir / "templates" / "a.csv") << "angle\n170\n100\n170\n";
    std::ofstream(dir / "c.json") << R"({"actions":[{"name":"a","expected_count":2,"template":"templates/a.csv"}]})";
    const auto c = load_config(dir / "c.json");
    CHECK(c.actions[0].template_samples == std::vector<double>{170, 100, 170});
    std::filesystem::remove_all(dir);
    CHECK(error_of([&] { load_config(dir / "c.json"); }).code() == ErrorCode::Io);
  }
}

TEST_SUITE("run_pipeline") {
  TEST_CASE("two actions, eight repetitions each") {
    const auto& r = eight_and_eight_result();
    CHECK(r.report.ok());
    CHECK(r.dataset.size() == 16);
    std::map<std::string, int> per;
    for (const auto& e : r.dataset.entries) ++per[e.action_name];
    CHECK(per["bicep_curl"] == 8);
    CHECK(per["lateral_raise"] == 8);
    CHECK(r.report.actions.size() == 2);
    for (const auto& a : r.report.actions) {
      CHECK(a.segments == 8);
      CHECK(a.distances.size() == 8);
      CHECK(a.minima >= 8);
    }
    CHECK(r.dataset.config_hash == config_hash(eight_and_eight().config));
    CHECK(r.dataset.templates.size() == 2);
    for (const auto& e : r.dataset.entries) {
      for (std::size_t i = 0; i < e.end_index - e.start_index; ++i) {
        CHECK(e.angle_targets[ingest::kElbow][i] == r.preprocessed.angles[ingest::kElbow][e.start_index + i]);
        CHECK(e.emg[0][i] == r.preprocessed.emg[0][e.start_index + i]);
      }
    }
    CHECK(format_report(r.report).find("\"lateral_raise\"") != std::string::npos);
  }

  TEST_CASE("short recording names the action and stage") {
    const auto& s = eight_and_eight();
    const auto short_rec = s.syn.recording.slice(0, 300);
    const auto r = run_pipeline(short_rec, s.config);
    CHECK_FALSE(r.report.ok());
    for (const auto& a : r.report.actions) {
      CHECK_FALSE(a.ok);
      CHECK(a.error_code == "insufficient_data");
      CHECK(a.stage == "mdtw_scan");
      CHECK(a.error.find(a.action) != std::string::npos);
    }
    CHECK(r.dataset.size() == 0);
  }

  TEST_CASE("one failing action keeps the other") {
    auto s = two_actions(4, 3);
    s.config.actions[1].template_samples.assign(s.syn.recording.size(), 90.0);
    const auto r = run_pipeline(s.syn.recording, s.config);
    CHECK(r.report.actions[0].ok);
    CHECK_FALSE(r.report.actions[1].ok);
    CHECK(r.dataset.size() == 4);
  }

  TEST_CASE("preprocessing keeps shape and is stepwise equivalent") {
    const auto& s = eight_and_eight();
    const auto pre = preprocess(s.syn.recording, s.config);
    CHECK(pre.size() == s.syn.recording.size());
    CHECK(pre.t == s.syn.recording.t);
    const auto stepwise = run_pipeline_preprocessed(pre, s.config);
    CHECK(matching::format_dataset(stepwise.dataset) == matching::format_dataset(eight_and_eight_result().dataset));
    const auto relabeled = label_recording(stepwise.segments, pre, s.config);
    CHECK(relabeled == stepwise.dataset);
    std::vector<matching::Segment> bad{{"unknown", 0, 10, 0.0}};
    CHECK(error_of([&] { label_recording(bad, pre, s.config); }).code() == ErrorCode::InvalidInput);
  }

  TEST_CASE("deterministic across runs and thread counts") {
    const auto& s = eight_and_eight();
    auto single = s.config;
    single.mdtw.threads = 1;
    const auto& ref = eight_and_eight_result();
    const auto a = run_pipeline(s.syn.recording, single);
    CHECK(a.segments == ref.segments);
    CHECK(a.dataset.entries == ref.dataset.entries);
    const auto b = run_pipeline(s.syn.recording, s.config);
    CHECK(matching::format_dataset(b.dataset) == matching::format_dataset(ref.dataset));
    CHECK(format_report(b.report) == format_report(ref.report));
  }
}

TEST_SUITE("training") {
  TEST_CASE("featurize, train, evaluate and persist") {
    const auto s = two_actions(20, 5);
    const auto r = run_pipeline(s.syn.recording, s.config);
    REQUIRE(r.dataset.size() == 40);
    const auto m = featurize(r.dataset, s.config);
    CHECK(m.row_count() == 40);
    CHECK(m.column_count() == 50);
    const auto model = train(m, s.config);
    CHECK(model.selection.chosen.size() == 10);
    CHECK(model.svm.dimension() == 10);
    CHECK(model.train_rows == 32);
    CHECK(model.cv.per_fold.size() == 5);
    const auto eval = evaluate_holdout(model, m);
    CHECK(eval.eval_rows == 8);
    CHECK(eval.holdout_accuracy >= 0.8);
    const auto back = parse_trained_model(format_trained_model(model));
    CHECK(format_trained_model(back) == format_trained_model(model));
    CHECK(evaluate_holdout(back, m).predicted == eval.predicted);
    CHECK(format_trained_model(train(m, s.config)) == format_trained_model(model));
    CHECK(format_evaluation(model, eval).find("holdout_accuracy") != std::string::npos);
  }
}

TEST_SUITE("plotdata") {
  TEST_CASE("files and manifest") {
    const auto& s = eight_and_eight();
    const auto dir = std::filesystem::temp_directory_path() / "emglabel_plot_test";
    std::filesystem::remove_all(dir);
    const auto files = write_plotdata(s.syn.recording, s.config, dir);
    for (const char* f : {"angles.csv", "distance_bicep_curl.csv", "distance_lateral_raise.csv", "segments.csv",
                          "labeled.csv", "manifest.json"}) {
      CHECK(std::find(files.begin(), files.end(), f) != files.end());
      CHECK(std::filesystem::exists(dir / f));
    }
    std::ifstream in(dir / "angles.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "index,t,raw_shoulder,ssa_shoulder,raw_elbow,ssa_elbow,raw_wrist,ssa_wrist");
    std::filesystem::remove_all(dir);
  }
}
