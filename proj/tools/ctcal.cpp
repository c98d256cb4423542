// Command-line front end for the calibtrack shared library.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "calibtrack.h"

namespace {

int report_failure(int code) {
    std::cerr << "error: " << ct_last_error() << "\n";
    return code == CT_OK ? 1 : -code;
}

std::string read_file_or_default(const std::string& path, const std::string& fallback) {
    if (path.empty()) return fallback;
    std::ifstream in(path);
    if (!in) {
        std::cerr << "error: cannot open " << path << "\n";
        std::exit(2);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string json_string_list(const std::vector<std::string>& items) {
    std::string out = "[";
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ",";
        out += "\"" + items[i] + "\"";
    }
    return out + "]";
}

std::string json_number_list(const std::vector<double>& items) {
    std::string out = "[";
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(items[i]);
    }
    return out + "]";
}

int write_or_print(const std::string& out_path, const char* report) {
    if (out_path.empty()) {
        std::cout << report << "\n";
        return 0;
    }
    std::ofstream out(out_path);
    if (!out) {
        std::cerr << "error: cannot open " << out_path << "\n";
        return 2;
    }
    out << report << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Detection calibration and calibrated tracking toolkit"};
    app.require_subcommand(1);

    // synth -----------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset or sequence");
    std::string synth_mode = "dataset", synth_config, synth_out, synth_gt_out;
    std::uint64_t synth_seed = 0;
    synth->add_option("--mode", synth_mode, "dataset or sequence")
        ->check(CLI::IsMember({"dataset", "sequence"}));
    synth->add_option("--config", synth_config, "generator config JSON file");
    synth->add_option("--seed", synth_seed, "random seed")->capture_default_str();
    synth->add_option("--out", synth_out, "detections JSONL output")->required();
    synth->add_option("--gt-out", synth_gt_out, "ground-truth JSONL output")->required();

    // calibrate-confidence --------------------------------------------------
    auto* calc = app.add_subcommand("calibrate-confidence", "Fit a confidence calibrator");
    std::string calc_method = "logistic", calc_features = "conf";
    bool calc_dependent = false, calc_bayesian = false;
    std::string calc_train, calc_gt, calc_model_out;
    double calc_iou = 0.5;
    std::uint64_t calc_seed = 0;
    calc->add_option("--method", calc_method, "hist, logistic, or beta")
        ->check(CLI::IsMember({"hist", "logistic", "beta"}));
    calc->add_option("--features", calc_features, "conf or conf+box")
        ->check(CLI::IsMember({"conf", "conf+box"}));
    calc->add_flag("--dependent", calc_dependent, "dependent multivariate variant");
    calc->add_flag("--bayesian", calc_bayesian, "variational posterior over parameters");
    calc->add_option("--train", calc_train, "detections JSONL")->required();
    calc->add_option("--gt", calc_gt, "ground-truth JSONL")->required();
    calc->add_option("--iou", calc_iou, "matching IoU threshold")->capture_default_str();
    calc->add_option("--seed", calc_seed, "seed for the bayesian fit")
        ->capture_default_str();
    calc->add_option("--model-out", calc_model_out, "model JSON output")->required();

    // calibrate-regression --------------------------------------------------
    auto* calr = app.add_subcommand("calibrate-regression",
                                    "Fit a spatial-uncertainty calibrator");
    std::string calr_method = "var-scaling", calr_train, calr_gt, calr_model_out;
    double calr_iou = 0.5;
    int calr_max_points = 1024;
    calr->add_option("--method", calr_method,
                     "isotonic, var-scaling, gp-normal, gp-cauchy, gp-beta, "
                     "gp-normal-mv, or covariance")
        ->check(CLI::IsMember({"isotonic", "var-scaling", "gp-normal", "gp-cauchy",
                               "gp-beta", "gp-normal-mv", "covariance"}));
    calr->add_option("--train", calr_train, "detections JSONL")->required();
    calr->add_option("--gt", calr_gt, "ground-truth JSONL")->required();
    calr->add_option("--iou", calr_iou, "matching IoU threshold")->capture_default_str();
    calr->add_option("--max-points", calr_max_points, "GP subsample size")
        ->capture_default_str();
    calr->add_option("--model-out", calr_model_out, "model JSON output")->required();

    // eval-calibration ------------------------------------------------------
    auto* evalc = app.add_subcommand("eval-calibration", "Score calibration metrics");
    std::string evalc_model, evalc_data, evalc_gt, evalc_out;
    std::vector<std::string> evalc_metrics;
    std::vector<double> evalc_taus;
    int evalc_bins = 20;
    double evalc_iou = 0.5;
    evalc->add_option("--model", evalc_model, "model JSON (optional)");
    evalc->add_option("--data", evalc_data, "detections JSONL")->required();
    evalc->add_option("--gt", evalc_gt, "ground-truth JSONL")->required();
    evalc->add_option("--metrics", evalc_metrics, "metric names")->delimiter(',');
    evalc->add_option("--bins", evalc_bins, "bin count")->capture_default_str();
    evalc->add_option("--tau-grid", evalc_taus, "quantile levels")->delimiter(',');
    evalc->add_option("--iou", evalc_iou, "matching IoU threshold")->capture_default_str();
    evalc->add_option("--out", evalc_out, "report output path (default stdout)");

    // track ------------------------------------------------------------------
    auto* track = app.add_subcommand("track", "Run the tracker over detections");
    std::string track_detections, track_conf_model, track_reg_model, track_config,
        track_out;
    track->add_option("--detections", track_detections, "detections JSONL")->required();
    track->add_option("--conf-model", track_conf_model, "confidence model JSON");
    track->add_option("--reg-model", track_reg_model, "regression model JSON");
    track->add_option("--tracker-config", track_config, "tracker config JSON file");
    track->add_option("--out", track_out, "tracks JSONL output")->required();

    // eval-mot ---------------------------------------------------------------
    auto* evalm = app.add_subcommand("eval-mot", "Evaluate tracks against ground truth");
    std::string evalm_tracks, evalm_gt, evalm_out;
    double evalm_iou = 0.5;
    evalm->add_option("--tracks", evalm_tracks, "tracks JSONL")->required();
    evalm->add_option("--gt", evalm_gt, "ground-truth JSONL")->required();
    evalm->add_option("--iou", evalm_iou, "matching IoU threshold")->capture_default_str();
    evalm->add_option("--out", evalm_out, "report output path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    if (synth->parsed()) {
        std::string config = read_file_or_default(synth_config, "{}");
        int rc = ct_synth(synth_mode.c_str(), config.c_str(), synth_seed,
                          synth_out.c_str(), synth_gt_out.c_str());
        if (rc != CT_OK) return report_failure(rc);
        return 0;
    }

    if (calc->parsed()) {
        std::ostringstream options;
        options << "{\"method\":\"" << calc_method << "\",\"features\":\""
                << calc_features << "\",\"dependent\":" << (calc_dependent ? "true" : "false")
                << ",\"bayesian\":" << (calc_bayesian ? "true" : "false")
                << ",\"iou\":" << calc_iou << ",\"seed\":" << calc_seed << "}";
        int rc = ct_calibrate_confidence(options.str().c_str(), calc_train.c_str(),
                                         calc_gt.c_str(), calc_model_out.c_str());
        if (rc != CT_OK) return report_failure(rc);
        return 0;
    }

    if (calr->parsed()) {
        std::ostringstream options;
        options << "{\"method\":\"" << calr_method << "\",\"iou\":" << calr_iou
                << ",\"max_points\":" << calr_max_points << "}";
        int rc = ct_calibrate_regression(options.str().c_str(), calr_train.c_str(),
                                         calr_gt.c_str(), calr_model_out.c_str());
        if (rc != CT_OK) return report_failure(rc);
        return 0;
    }

    if (evalc->parsed()) {
        std::ostringstream options;
        options << "{\"bins\":" << evalc_bins << ",\"iou\":" << evalc_iou;
        if (!evalc_metrics.empty())
            options << ",\"metrics\":" << json_string_list(evalc_metrics);
        if (!evalc_taus.empty())
            options << ",\"tau_grid\":" << json_number_list(evalc_taus);
        options << "}";
        char* report = nullptr;
        int rc = ct_eval_calibration(options.str().c_str(), evalc_data.c_str(),
                                     evalc_gt.c_str(),
                                     evalc_model.empty() ? nullptr : evalc_model.c_str(),
                                     &report);
        if (rc != CT_OK) return report_failure(rc);
        int wrc = write_or_print(evalc_out, report);
        ct_free_string(report);
        return wrc;
    }

    if (track->parsed()) {
        std::string config = read_file_or_default(track_config, "{}");
        int rc = ct_track(config.c_str(), track_detections.c_str(),
                          track_conf_model.empty() ? nullptr : track_conf_model.c_str(),
                          track_reg_model.empty() ? nullptr : track_reg_model.c_str(),
                          track_out.c_str());
        if (rc != CT_OK) return report_failure(rc);
        return 0;
    }

    if (evalm->parsed()) {
        char* report = nullptr;
        int rc = ct_eval_mot(evalm_tracks.c_str(), evalm_gt.c_str(), evalm_iou, &report);
        if (rc != CT_OK) return report_failure(rc);
        int wrc = write_or_print(evalm_out, report);
        ct_free_string(report);
        return wrc;
    }

    return 0;
}
