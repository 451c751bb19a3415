#include "mildatlas.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "core/harness.hpp"
#include "core/selftest.hpp"

using namespace mildatlas;

struct ma_family {
    Family fam;
};

struct ma_atlas {
    Atlas atlas;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <typename Fn>
ma_status guarded(Fn&& fn) {
    try {
        g_last_error.clear();
        return fn();
    } catch (const Error& e) {
        g_last_error = e.what();
        return e.kind() == ErrorKind::Input ? MA_INVALID_INPUT : MA_INTERNAL_ERROR;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return MA_INTERNAL_ERROR;
    } catch (...) {
        g_last_error = "unknown error";
        return MA_INTERNAL_ERROR;
    }
}

} // namespace

extern "C" {

const char* ma_last_error(void) { return g_last_error.c_str(); }

void ma_string_free(char* s) { std::free(s); }

ma_status ma_family_parse(const char* json, ma_family** out) {
    return guarded([&]() -> ma_status {
        if (!json || !out) fail_input("null argument");
        auto handle = std::make_unique<ma_family>();
        handle->fam = parse_family(json);
        *out = handle.release();
        return MA_OK;
    });
}

void ma_family_free(ma_family* fam) { delete fam; }

ma_status ma_family_serialize(const ma_family* fam, char** json_out) {
    return guarded([&]() -> ma_status {
        if (!fam || !json_out) fail_input("null argument");
        *json_out = dup_string(serialize_family(fam->fam));
        return MA_OK;
    });
}

ma_status ma_family_certify(const ma_family* fam, char** report_out) {
    return guarded([&]() -> ma_status {
        if (!fam || !report_out) fail_input("null argument");
        bool ok = false;
        *report_out = dup_string(certify_family_report(fam->fam, &ok));
        return ok ? MA_OK : MA_VERIFY_FAILED;
    });
}

ma_status ma_family_evaluate(const ma_family* fam, const double* t, size_t t_len,
                             const double* x, size_t x_len, double* values_out,
                             size_t values_len, int* member_out) {
    return guarded([&]() -> ma_status {
        if (!fam) fail_input("null family");
        const std::vector<double> tv(t, t + t_len);
        const std::vector<double> xv(x, x + x_len);
        const auto res = evaluate(fam->fam, tv, xv);
        if (values_len < res.values.size()) fail_input("values buffer too small");
        for (size_t i = 0; i < res.values.size(); ++i) values_out[i] = res.values[i];
        if (member_out) *member_out = res.member ? 1 : 0;
        return MA_OK;
    });
}

ma_status ma_family_shape(const ma_family* fam, int* k_out, int* m_out, int* n_out) {
    return guarded([&]() -> ma_status {
        if (!fam) fail_input("null family");
        if (k_out) *k_out = fam->fam.k;
        if (m_out) *m_out = fam->fam.m;
        if (n_out) *n_out = fam->fam.n;
        return MA_OK;
    });
}

ma_status ma_family_parameter_midpoint(const ma_family* fam, double* t_out, size_t t_len) {
    return guarded([&]() -> ma_status {
        if (!fam || !t_out) fail_input("null argument");
        if (t_len < static_cast<size_t>(fam->fam.k)) fail_input("buffer too small");
        for (int i = 0; i < fam->fam.k; ++i) t_out[static_cast<size_t>(i)] = fam->fam.T[i].mid();
        return MA_OK;
    });
}

ma_status ma_atlas_build(const ma_family* fam, const double* t, size_t t_len, int r,
                         int mode, ma_atlas** out) {
    return guarded([&]() -> ma_status {
        if (!fam || !out) fail_input("null argument");
        const std::vector<double> tv(t, t + t_len);
        auto handle = std::make_unique<ma_atlas>();
        handle->atlas = build_atlas(fam->fam, tv, r,
                                    mode == 1 ? AtlasMode::Improved : AtlasMode::Standard);
        *out = handle.release();
        return MA_OK;
    });
}

void ma_atlas_free(ma_atlas* atlas) { delete atlas; }

ma_status ma_atlas_to_json(const ma_atlas* atlas, char** json_out) {
    return guarded([&]() -> ma_status {
        if (!atlas || !json_out) fail_input("null argument");
        *json_out = dup_string(atlas_to_json(atlas->atlas));
        return MA_OK;
    });
}

ma_status ma_atlas_parse(const char* json, ma_atlas** out) {
    return guarded([&]() -> ma_status {
        if (!json || !out) fail_input("null argument");
        auto handle = std::make_unique<ma_atlas>();
        handle->atlas = atlas_from_json(json);
        *out = handle.release();
        return MA_OK;
    });
}

long long ma_atlas_chart_count(const ma_atlas* atlas) {
    return atlas ? atlas->atlas.chart_count : -1;
}

ma_status ma_atlas_verify(const ma_atlas* atlas, const ma_family* fam, int samples,
                          double margin, double tol, char** report_out) {
    return guarded([&]() -> ma_status {
        if (!atlas) fail_input("null atlas");
        VerifyOptions opt;
        if (samples > 0) opt.samples = samples;
        if (margin >= 0) opt.margin = margin;
        if (tol >= 0) opt.tol = tol;
        VerifyReport vr = verify_chart_norms(atlas->atlas, opt);
        bool pass = vr.pass;
        CoverageReport cov;
        const CoverageReport* cov_ptr = nullptr;
        if (fam) {
            cov = verify_coverage(fam->fam, atlas->atlas, opt.samples, opt.seed);
            cov_ptr = &cov;
            pass = pass && cov.pass;
        }
        if (report_out) *report_out = dup_string(emit_report(atlas->atlas, vr, opt, cov_ptr));
        if (!pass) {
            g_last_error = "verification failed";
            return MA_VERIFY_FAILED;
        }
        return MA_OK;
    });
}

ma_status ma_growth(const ma_family* fam, const double* t, size_t t_len, int r_min,
                    int r_max, int mode, char** report_out) {
    return guarded([&]() -> ma_status {
        if (!fam) fail_input("null family");
        const std::vector<double> tv(t, t + t_len);
        const AtlasMode am = mode == 1 ? AtlasMode::Improved : AtlasMode::Standard;
        GrowthFit fit = growth_fit(fam->fam, tv, r_min, r_max, am);
        if (report_out) *report_out = dup_string(growth_report(fam->fam, fit, am, tv));
        return MA_OK;
    });
}

ma_status ma_selftest(char** log_out) {
    return guarded([&]() -> ma_status {
        SelftestResult res = run_selftest();
        if (log_out) *log_out = dup_string(res.log);
        if (res.failed > 0) {
            g_last_error = std::to_string(res.failed) + " selftest check(s) failed";
            return MA_VERIFY_FAILED;
        }
        return MA_OK;
    });
}

} // extern "C"
