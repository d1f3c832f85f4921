#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "../error.hpp"

namespace vqaadv::metrics {

using nlohmann::json;

/// Scores of one evaluated (sample, adversarial output) pair. Metric scores are in [0, 1].
struct SampleEvaluation {
    std::string sample_id;
    std::string predicted_answer;
    std::string predicted_explanation;
    bool answer_correct = false;
    double answer_soft = 0.0;
    double b1 = 0, b2 = 0, b3 = 0, b4 = 0, rl = 0, m = 0;
    std::optional<double> bs; // absent when the token embedder failed
    std::optional<int> correctness, detail, context;
    std::vector<std::string> flags;
};

inline void to_json(json &j, const SampleEvaluation &e) {
    auto opt = [](const auto &v) { return v ? json(*v) : json(nullptr); };
    j = json{{"sample_id", e.sample_id},
             {"predicted_answer", e.predicted_answer},
             {"predicted_explanation", e.predicted_explanation},
             {"answer_correct", e.answer_correct},
             {"answer_soft", e.answer_soft},
             {"scores",
              {{"B1", e.b1}, {"B2", e.b2}, {"B3", e.b3}, {"B4", e.b4}, {"RL", e.rl}, {"M", e.m},
               {"BS", opt(e.bs)}}},
             {"judge",
              {{"correctness", opt(e.correctness)},
               {"detail", opt(e.detail)},
               {"context", opt(e.context)}}},
             {"flags", e.flags}};
}

inline void from_json(const json &j, SampleEvaluation &e) {
    auto opt_d = [](const json &v) { return v.is_null() ? std::optional<double>{} : v.get<double>(); };
    auto opt_i = [](const json &v) { return v.is_null() ? std::optional<int>{} : v.get<int>(); };
    e.sample_id = j.at("sample_id").get<std::string>();
    e.predicted_answer = j.at("predicted_answer").get<std::string>();
    e.predicted_explanation = j.at("predicted_explanation").get<std::string>();
    e.answer_correct = j.at("answer_correct").get<bool>();
    e.answer_soft = j.at("answer_soft").get<double>();
    const auto &s = j.at("scores");
    e.b1 = s.at("B1").get<double>();
    e.b2 = s.at("B2").get<double>();
    e.b3 = s.at("B3").get<double>();
    e.b4 = s.at("B4").get<double>();
    e.rl = s.at("RL").get<double>();
    e.m = s.at("M").get<double>();
    e.bs = opt_d(s.at("BS"));
    const auto &jd = j.at("judge");
    e.correctness = opt_i(jd.at("correctness"));
    e.detail = opt_i(jd.at("detail"));
    e.context = opt_i(jd.at("context"));
    e.flags = j.value("flags", std::vector<std::string>{});
}

enum class ReportMode { filtered, unfiltered };

inline std::string to_string(ReportMode m) {
    return m == ReportMode::filtered ? "filtered" : "unfiltered";
}

/// Aggregate scores. Metric means are x100 with one decimal, judge means keep two.
struct MetricReport {
    ReportMode mode = ReportMode::unfiltered;
    std::size_t total = 0;
    std::size_t correct = 0;
    std::size_t evaluated = 0;
    std::vector<std::string> evaluated_ids;
    std::optional<double> b1, b2, b3, b4, rl, m, bs, acc;
    std::optional<double> correctness, detail, context;
};

inline double round_to(double v, int decimals) {
    double scale = std::pow(10.0, decimals);
    return std::round(v * scale) / scale;
}

/// Filtered mode averages over correctly answered samples only; unfiltered over all.
/// Accuracy is always over all samples.
inline MetricReport aggregate(const std::vector<SampleEvaluation> &evals, ReportMode mode) {
    if (evals.empty())
        throw Error("aggregate needs at least one evaluation");
    MetricReport r;
    r.mode = mode;
    r.total = evals.size();
    double acc_sum = 0.0;
    for (const auto &e : evals) {
        if (e.answer_correct)
            ++r.correct;
        acc_sum += e.answer_correct ? 1.0 : 0.0;
    }
    r.acc = round_to(100.0 * acc_sum / r.total, 1);

    struct Mean {
        double sum = 0;
        std::size_t n = 0;
        void add(double v) {
            sum += v;
            ++n;
        }
        std::optional<double> get(double scale, int decimals) const {
            if (n == 0)
                return std::nullopt;
            return round_to(scale * sum / n, decimals);
        }
    };
    Mean b1, b2, b3, b4, rl, m, bs, corr, det, ctx;
    for (const auto &e : evals) {
        if (mode == ReportMode::filtered && !e.answer_correct)
            continue;
        ++r.evaluated;
        r.evaluated_ids.push_back(e.sample_id);
        b1.add(e.b1);
        b2.add(e.b2);
        b3.add(e.b3);
        b4.add(e.b4);
        rl.add(e.rl);
        m.add(e.m);
        if (e.bs)
            bs.add(*e.bs);
        if (e.correctness)
            corr.add(*e.correctness);
        if (e.detail)
            det.add(*e.detail);
        if (e.context)
            ctx.add(*e.context);
    }
    r.b1 = b1.get(100, 1);
    r.b2 = b2.get(100, 1);
    r.b3 = b3.get(100, 1);
    r.b4 = b4.get(100, 1);
    r.rl = rl.get(100, 1);
    r.m = m.get(100, 1);
    r.bs = bs.get(100, 1);
    r.correctness = corr.get(1, 2);
    r.detail = det.get(1, 2);
    r.context = ctx.get(1, 2);
    return r;
}

inline json to_json(const MetricReport &r) {
    auto opt = [](const std::optional<double> &v) { return v ? json(*v) : json(nullptr); };
    return json{{"mode", to_string(r.mode)},
                {"counts", {{"total", r.total}, {"correct", r.correct}, {"evaluated", r.evaluated}}},
                {"means",
                 {{"B1", opt(r.b1)},
                  {"B2", opt(r.b2)},
                  {"B3", opt(r.b3)},
                  {"B4", opt(r.b4)},
                  {"RL", opt(r.rl)},
                  {"M", opt(r.m)},
                  {"BS", opt(r.bs)},
                  {"Acc", opt(r.acc)}}},
                {"judge",
                 {{"correctness", opt(r.correctness)},
                  {"detail", opt(r.detail)},
                  {"context", opt(r.context)}}},
                {"evaluated_ids", r.evaluated_ids}};
}

namespace detail {

inline std::string cell(const std::optional<double> &v, int decimals) {
    if (!v)
        return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, *v);
    return buf;
}

} // namespace detail

using ReportRow = std::pair<std::string, MetricReport>; // (method name, report)

/// Column order of the explanation-metric tables: Method,B1,B2,B3,B4,RL,M,BS[,Acc].
inline std::string metric_table_csv(const std::vector<ReportRow> &rows, bool with_accuracy) {
    std::string out = "Method,B1,B2,B3,B4,RL,M,BS";
    out += with_accuracy ? ",Acc\n" : "\n";
    for (const auto &[method, r] : rows) {
        out += method;
        for (const auto *v : {&r.b1, &r.b2, &r.b3, &r.b4, &r.rl, &r.m, &r.bs})
            out += "," + detail::cell(*v, 1);
        if (with_accuracy)
            out += "," + detail::cell(r.acc, 1);
        out += "\n";
    }
    return out;
}

/// Column order of the judge tables: Method,Correctness,Detail,Context[,Acc].
inline std::string judge_table_csv(const std::vector<ReportRow> &rows, bool with_accuracy) {
    std::string out = "Method,Correctness,Detail,Context";
    out += with_accuracy ? ",Acc\n" : "\n";
    for (const auto &[method, r] : rows) {
        out += method;
        for (const auto *v : {&r.correctness, &r.detail, &r.context})
            out += "," + detail::cell(*v, 2);
        if (with_accuracy)
            out += "," + detail::cell(r.acc, 1);
        out += "\n";
    }
    return out;
}

} // namespace vqaadv::metrics
