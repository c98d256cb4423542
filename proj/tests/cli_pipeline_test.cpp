// End-to-end checks of the ctcal binary and the C API: synthesize data,
// calibrate, evaluate, track, and verify error handling. The CLI path is
// argv[1]; everything runs inside a scratch directory.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "calibtrack.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int g_failures = 0;
std::string g_cli;
fs::path g_dir;

void check(bool ok, const std::string& what) {
    std::printf("  %-68s %s\n", what.c_str(), ok ? "pass" : "FAIL");
    if (!ok) ++g_failures;
}

int run(const std::string& args) {
    std::string cmd = g_cli + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

std::string path(const std::string& name) { return (g_dir / name).string(); }

void write_file(const std::string& name, const std::string& content) {
    std::ofstream out(path(name));
    out << content;
}

json read_json(const std::string& name) {
    std::ifstream in(path(name));
    return json::parse(std::string(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>()));
}

void confidence_pipeline() {
    std::printf("confidence calibration pipeline\n");
    write_file("distortion.json",
               R"({"distortion":{"link_w":0.5,"link_delta":0.3},"n":20000})");

    check(run("synth --mode dataset --config " + path("distortion.json") +
              " --seed 5 --out " + path("train_det.jsonl") + " --gt-out " +
              path("train_gt.jsonl")) == 0,
          "synth dataset (train)");
    check(run("synth --mode dataset --config " + path("distortion.json") +
              " --seed 6 --out " + path("eval_det.jsonl") + " --gt-out " +
              path("eval_gt.jsonl")) == 0,
          "synth dataset (eval)");

    check(run("eval-calibration --data " + path("eval_det.jsonl") + " --gt " +
              path("eval_gt.jsonl") + " --metrics ece,auprc --out " +
              path("raw_report.json")) == 0,
          "eval-calibration without a model");
    double ece_raw = read_json("raw_report.json")["metrics"]["ece"];
    check(ece_raw >= 0.05, "uncalibrated ECE is visibly miscalibrated");

    check(run("calibrate-confidence --method logistic --train " +
              path("train_det.jsonl") + " --gt " + path("train_gt.jsonl") +
              " --model-out " + path("conf_model.json")) == 0,
          "calibrate-confidence logistic");
    check(run("eval-calibration --model " + path("conf_model.json") + " --data " +
              path("eval_det.jsonl") + " --gt " + path("eval_gt.jsonl") +
              " --metrics ece,auprc --out " + path("cal_report.json")) == 0,
          "eval-calibration with the fitted model");
    json cal = read_json("cal_report.json");
    double ece_cal = cal["metrics"]["ece"];
    check(ece_cal < 0.02 && ece_cal < ece_raw, "held-out ECE drops below 0.02");
    double auprc_raw = read_json("raw_report.json")["metrics"]["auprc"];
    double auprc_cal = cal["metrics"]["auprc"];
    check(std::abs(auprc_raw - auprc_cal) < 1e-9,
          "monotone recalibration leaves AUPRC unchanged");

    // The saved model through the C API: valid probabilities, monotone in
    // the raw confidence, consistent with the CLI-evaluated improvement.
    ct_conf_model* model = nullptr;
    check(ct_conf_model_load(path("conf_model.json").c_str(), &model) == CT_OK,
          "conf model loads through the C API");
    double lo = 0.0, hi = 0.0;
    check(ct_conf_model_transform(model, 0.2, 0.5, 0.5, 0.1, 0.1, &lo) == CT_OK &&
              ct_conf_model_transform(model, 0.9, 0.5, 0.5, 0.1, 0.1, &hi) == CT_OK,
          "conf model transform succeeds");
    check(lo >= 0.0 && hi <= 1.0 && lo < hi,
          "calibrated confidences are ordered probabilities");
    ct_conf_model_free(model);
}

void tracking_pipeline() {
    std::printf("tracking pipeline\n");
    write_file("flood.json",
               R"({"objects":4,"frames":60,"detection_probability":0.95,)"
               R"("false_positives_per_frame":3.0})");
    write_file("tracker.json",
               R"({"process_noise":1e-5,"initial_velocity_var":1e-2,)"
               R"("initial_acceleration_var":1e-3,"default_observation_var":2.5e-5,)"
               R"("gate_quantile":0.999})");

    check(run("synth --mode sequence --config " + path("flood.json") +
              " --seed 7777 --out " + path("seq_train_det.jsonl") + " --gt-out " +
              path("seq_train_gt.jsonl")) == 0,
          "synth flood sequence (train)");
    check(run("synth --mode sequence --config " + path("flood.json") +
              " --seed 12 --out " + path("seq_det.jsonl") + " --gt-out " +
              path("seq_gt.jsonl")) == 0,
          "synth flood sequence (eval)");
    check(run("calibrate-confidence --method logistic --train " +
              path("seq_train_det.jsonl") + " --gt " + path("seq_train_gt.jsonl") +
              " --model-out " + path("seq_conf_model.json")) == 0,
          "calibrate-confidence on the sequence");

    check(run("track --detections " + path("seq_det.jsonl") + " --tracker-config " +
              path("tracker.json") + " --out " + path("tracks_raw.jsonl")) == 0,
          "track without calibration");
    check(run("track --detections " + path("seq_det.jsonl") + " --tracker-config " +
              path("tracker.json") + " --conf-model " + path("seq_conf_model.json") +
              " --out " + path("tracks_cal.jsonl")) == 0,
          "track with confidence calibration");
    check(run("eval-mot --tracks " + path("tracks_raw.jsonl") + " --gt " +
              path("seq_gt.jsonl") + " --out " + path("mot_raw.json")) == 0 &&
              run("eval-mot --tracks " + path("tracks_cal.jsonl") + " --gt " +
                  path("seq_gt.jsonl") + " --out " + path("mot_cal.json")) == 0,
          "eval-mot on both runs");
    json raw = read_json("mot_raw.json"), cal = read_json("mot_cal.json");
    check(cal["mota"].get<double>() > raw["mota"].get<double>(),
          "confidence calibration raises MOTA");
    check(cal["fp_per_frame"].get<double>() < raw["fp_per_frame"].get<double>(),
          "confidence calibration cuts false positives per frame");

    // Variance calibration: the generator under-reports observation noise by
    // a factor of two in std-dev; the fitted scaler should inflate it back.
    write_file("quiet.json",
               R"({"objects":4,"frames":120,"detection_probability":1.0,)"
               R"("false_positives_per_frame":0.0,)"
               R"("distortion":{"variance_scale":2.0}})");
    check(run("synth --mode sequence --config " + path("quiet.json") +
              " --seed 8888 --out " + path("reg_train_det.jsonl") + " --gt-out " +
              path("reg_train_gt.jsonl")) == 0 &&
              run("synth --mode sequence --config " + path("quiet.json") +
                  " --seed 8890 --out " + path("reg_det.jsonl") + " --gt-out " +
                  path("reg_gt.jsonl")) == 0,
          "synth quiet sequences");
    check(run("calibrate-regression --method var-scaling --train " +
              path("reg_train_det.jsonl") + " --gt " + path("reg_train_gt.jsonl") +
              " --model-out " + path("reg_model.json")) == 0,
          "calibrate-regression var-scaling");

    ct_reg_model* reg = nullptr;
    check(ct_reg_model_load(path("reg_model.json").c_str(), &reg) == CT_OK,
          "regression model loads through the C API");
    double mean[4] = {0.5, 0.5, 0.1, 0.1};
    double var[4] = {2.5e-5, 2.5e-5, 2.5e-5, 2.5e-5};
    double cov[16] = {0};
    check(ct_reg_model_covariance(reg, mean, var, cov) == CT_OK,
          "covariance transform succeeds");
    bool inflated = true, symmetric = true;
    for (int d = 0; d < 4; ++d) inflated = inflated && cov[5 * d] > 2.0 * var[d];
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            symmetric = symmetric && std::abs(cov[4 * i + j] - cov[4 * j + i]) < 1e-12;
    check(inflated, "calibrated variances inflate the under-reported diagonal");
    check(symmetric, "calibrated covariance is symmetric");
    ct_reg_model_free(reg);

    check(run("track --detections " + path("reg_det.jsonl") + " --tracker-config " +
              path("tracker.json") + " --out " + path("reg_tracks_raw.jsonl")) == 0 &&
              run("track --detections " + path("reg_det.jsonl") +
                  " --tracker-config " + path("tracker.json") + " --reg-model " +
                  path("reg_model.json") + " --out " + path("reg_tracks_cal.jsonl")) == 0,
          "track with and without variance calibration");
    check(run("eval-mot --tracks " + path("reg_tracks_raw.jsonl") + " --gt " +
              path("reg_gt.jsonl") + " --out " + path("reg_mot_raw.json")) == 0 &&
              run("eval-mot --tracks " + path("reg_tracks_cal.jsonl") + " --gt " +
                  path("reg_gt.jsonl") + " --out " + path("reg_mot_cal.json")) == 0,
          "eval-mot on the variance runs");
    json rraw = read_json("reg_mot_raw.json"), rcal = read_json("reg_mot_cal.json");
    check(rcal["motp_distance"].get<double>() < rraw["motp_distance"].get<double>(),
          "variance calibration tightens localization");
}

void error_paths() {
    std::printf("error handling\n");
    check(ct_synth("nonsense", "{}", 1, path("x.jsonl").c_str(),
                   path("y.jsonl").c_str()) == CT_ERROR_INVALID_ARGUMENT,
          "bad synth mode is rejected");
    check(std::string(ct_last_error()).find("mode") != std::string::npos,
          "error message mentions the bad argument");

    ct_conf_model* model = nullptr;
    check(ct_conf_model_load(path("does_not_exist.json").c_str(), &model) != CT_OK,
          "loading a missing model fails");
    check(ct_conf_model_load(nullptr, &model) == CT_ERROR_INVALID_ARGUMENT,
          "null path is rejected");
    check(ct_synth("dataset", "{not json", 1, path("x.jsonl").c_str(),
                   path("y.jsonl").c_str()) == CT_ERROR_INVALID_ARGUMENT,
          "malformed config JSON is rejected");

    char* report = nullptr;
    check(ct_eval_mot(path("does_not_exist.jsonl").c_str(),
                      path("seq_gt.jsonl").c_str(), 0.5, &report) != CT_OK,
          "eval-mot on a missing file fails");
    check(run("eval-mot --tracks " + path("does_not_exist.jsonl") + " --gt " +
              path("seq_gt.jsonl")) != 0,
          "CLI propagates the failure as a nonzero exit");
    check(ct_version() != nullptr && std::string(ct_version()).size() > 0,
          "version string is available");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: %s <path-to-ctcal>\n", argv[0]);
        return 2;
    }
    g_cli = argv[1];
    g_dir = fs::temp_directory_path() / "ctcal_pipeline_test";
    fs::remove_all(g_dir);
    fs::create_directories(g_dir);

    confidence_pipeline();
    tracking_pipeline();
    error_paths();

    fs::remove_all(g_dir);
    std::printf("%s\n", g_failures == 0 ? "all pipeline checks passed"
                                        : "pipeline checks FAILED");
    return g_failures == 0 ? 0 : 1;
}
