// Command-line front end over the shared C API: certify families, build and
// verify atlases, fit chart-count growth, run the built-in example suite.
//
// Exit codes: 0 success / verification passed, 1 verification failure,
// 2 invalid input, 3 internal error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mildatlas.h"

namespace {

int status_to_exit(ma_status st) {
    switch (st) {
    case MA_OK: return 0;
    case MA_VERIFY_FAILED: return 1;
    case MA_INVALID_INPUT: return 2;
    case MA_INTERNAL_ERROR: return 3;
    }
    return 3;
}

bool read_file(const std::string& path, std::string& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    std::ostringstream ss;
    ss << in.rdbuf();
    out = ss.str();
    return true;
}

int write_output(const char* text, const std::string& path) {
    if (path.empty()) {
        std::cout << text;
        if (*text && text[std::string(text).size() - 1] != '\n') std::cout << '\n';
        return 0;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        std::cerr << "error: cannot write " << path << "\n";
        return 2;
    }
    out << text;
    return 0;
}

struct FamilyHandle {
    ma_family* fam = nullptr;
    ~FamilyHandle() { ma_family_free(fam); }
};

struct AtlasHandle {
    ma_atlas* atlas = nullptr;
    ~AtlasHandle() { ma_atlas_free(atlas); }
};

struct StringHandle {
    char* s = nullptr;
    ~StringHandle() { ma_string_free(s); }
};

int load_family(const std::string& path, FamilyHandle& handle) {
    std::string text;
    if (!read_file(path, text)) {
        std::cerr << "error: cannot read " << path << "\n";
        return 2;
    }
    const ma_status st = ma_family_parse(text.c_str(), &handle.fam);
    if (st != MA_OK) {
        std::cerr << "error: " << ma_last_error() << "\n";
        return status_to_exit(st);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"certified chart parameterizations of prepared families"};
    app.require_subcommand(1);

    std::string family_path, atlas_path, output_path;
    std::vector<double> t_values;
    int r = 2, r_min = 2, r_max = 5;
    bool improved = false;
    int samples = -1;
    double margin = -1.0, tol = -1.0;

    auto* cmd_certify = app.add_subcommand("certify", "validate a family and emit its certificate audit");
    cmd_certify->add_option("family", family_path, "family JSON document")->required();
    cmd_certify->add_option("-o,--output", output_path, "write the report here (default stdout)");

    auto* cmd_atlas = app.add_subcommand("atlas", "build an atlas at a fixed parameter");
    cmd_atlas->add_option("family", family_path, "family JSON document")->required();
    cmd_atlas->add_option("--t", t_values, "parameter values (k numbers)")->expected(-1);
    cmd_atlas->add_option("--r", r, "target smoothness order")->required();
    cmd_atlas->add_flag("--improved", improved, "use the improved wall normalization (m >= 2)");
    cmd_atlas->add_option("-o,--output", output_path, "write the atlas here (default stdout)");

    auto* cmd_verify = app.add_subcommand("verify", "check the norm bound of every chart of an atlas");
    cmd_verify->add_option("atlas", atlas_path, "atlas JSON document")->required();
    cmd_verify->add_option("--samples", samples, "samples per chart (default 500)");
    cmd_verify->add_option("--margin", margin, "boundary margin (default 1e-9)");
    cmd_verify->add_option("--tol", tol, "norm slack (default 1e-9)");
    cmd_verify->add_option("--family", family_path, "family document for the coverage check");
    cmd_verify->add_option("-o,--output", output_path, "write the report here (default stdout)");

    auto* cmd_growth = app.add_subcommand("growth", "chart counts over a range of orders");
    cmd_growth->add_option("family", family_path, "family JSON document")->required();
    cmd_growth->add_option("--t", t_values, "parameter values (default: box midpoint)")->expected(-1);
    cmd_growth->add_option("--r-min", r_min, "smallest order")->required();
    cmd_growth->add_option("--r-max", r_max, "largest order")->required();
    cmd_growth->add_flag("--improved", improved, "use the improved wall normalization");
    cmd_growth->add_option("-o,--output", output_path, "write the table here (default stdout)");

    auto* cmd_selftest = app.add_subcommand("selftest", "run the built-in example suite");
    cmd_selftest->add_option("-o,--output", output_path, "write the log here (default stdout)");

    CLI11_PARSE(app, argc, argv);

    if (cmd_certify->parsed()) {
        FamilyHandle fam;
        if (int rc = load_family(family_path, fam)) return rc;
        StringHandle report;
        const ma_status st = ma_family_certify(fam.fam, &report.s);
        if (st == MA_INVALID_INPUT || st == MA_INTERNAL_ERROR) {
            std::cerr << "error: " << ma_last_error() << "\n";
            return status_to_exit(st);
        }
        if (int rc = write_output(report.s, output_path)) return rc;
        return status_to_exit(st);
    }

    if (cmd_atlas->parsed()) {
        FamilyHandle fam;
        if (int rc = load_family(family_path, fam)) return rc;
        AtlasHandle atlas;
        ma_status st = ma_atlas_build(fam.fam, t_values.data(), t_values.size(), r,
                                      improved ? 1 : 0, &atlas.atlas);
        if (st != MA_OK) {
            std::cerr << "error: " << ma_last_error() << "\n";
            return status_to_exit(st);
        }
        StringHandle json;
        st = ma_atlas_to_json(atlas.atlas, &json.s);
        if (st != MA_OK) {
            std::cerr << "error: " << ma_last_error() << "\n";
            return status_to_exit(st);
        }
        return write_output(json.s, output_path);
    }

    if (cmd_verify->parsed()) {
        std::string text;
        if (!read_file(atlas_path, text)) {
            std::cerr << "error: cannot read " << atlas_path << "\n";
            return 2;
        }
        AtlasHandle atlas;
        ma_status st = ma_atlas_parse(text.c_str(), &atlas.atlas);
        if (st != MA_OK) {
            std::cerr << "error: " << ma_last_error() << "\n";
            return status_to_exit(st);
        }
        FamilyHandle fam;
        if (!family_path.empty()) {
            if (int rc = load_family(family_path, fam)) return rc;
        }
        StringHandle report;
        st = ma_atlas_verify(atlas.atlas, fam.fam, samples, margin, tol, &report.s);
        if (st == MA_INVALID_INPUT || st == MA_INTERNAL_ERROR) {
            std::cerr << "error: " << ma_last_error() << "\n";
            return status_to_exit(st);
        }
        if (int rc = write_output(report.s, output_path)) return rc;
        return status_to_exit(st);
    }

    if (cmd_growth->parsed()) {
        FamilyHandle fam;
        if (int rc = load_family(family_path, fam)) return rc;
        if (t_values.empty()) {
            int k = 0;
            if (ma_family_shape(fam.fam, &k, nullptr, nullptr) == MA_OK && k > 0) {
                t_values.resize(static_cast<size_t>(k));
                if (ma_family_parameter_midpoint(fam.fam, t_values.data(), t_values.size()) !=
                    MA_OK) {
                    std::cerr << "error: " << ma_last_error() << "\n";
                    return 3;
                }
            }
        }
        StringHandle report;
        const ma_status st = ma_growth(fam.fam, t_values.data(), t_values.size(), r_min, r_max,
                                       improved ? 1 : 0, &report.s);
        if (st != MA_OK) {
            std::cerr << "error: " << ma_last_error() << "\n";
            return status_to_exit(st);
        }
        return write_output(report.s, output_path);
    }

    if (cmd_selftest->parsed()) {
        StringHandle log;
        const ma_status st = ma_selftest(&log.s);
        if (int rc = write_output(log.s ? log.s : "", output_path)) return rc;
        if (st != MA_OK) std::cerr << "selftest: " << ma_last_error() << "\n";
        return status_to_exit(st);
    }

    return 2;
}
