#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coco.hpp"
#include "error.hpp"
#include "tokenize.hpp"

namespace vqaadv {

enum class Split { train, val };

inline std::string to_string(Split s) { return s == Split::train ? "train" : "val"; }

inline Split parse_split(std::string_view s) {
    if (s == "train")
        return Split::train;
    if (s == "val")
        return Split::val;
    throw ConfigError("unknown split '" + std::string(s) + "'");
}

/// One VQA-NLE record.
struct Sample {
    std::string sample_id;
    std::int64_t image_id = 0;
    std::string image_ref; // COCO image id in decimal; pixels resolved via the annotation index
    std::string question;
    std::vector<std::string> gold_answers;
    std::vector<std::string> gold_explanations;
    Split split = Split::val;
};

inline void to_json(json &j, const Sample &s) {
    j = json{{"sample_id", s.sample_id},
             {"image_id", s.image_id},
             {"image_ref", s.image_ref},
             {"question", s.question},
             {"gold_answers", s.gold_answers},
             {"gold_explanations", s.gold_explanations},
             {"split", to_string(s.split)}};
}

inline void from_json(const json &j, Sample &s) {
    s.sample_id = j.at("sample_id").get<std::string>();
    s.image_id = j.at("image_id").get<std::int64_t>();
    s.image_ref = j.value("image_ref", std::to_string(s.image_id));
    s.question = j.at("question").get<std::string>();
    s.gold_answers = j.at("gold_answers").get<std::vector<std::string>>();
    s.gold_explanations = j.at("gold_explanations").get<std::vector<std::string>>();
    s.split = parse_split(j.value("split", std::string("val")));
}

struct LoadReport {
    std::size_t records = 0;
    std::size_t loaded = 0;
    std::vector<std::string> skipped_ids;
    std::vector<std::string> warnings;

    json to_json() const {
        return json{{"counts",
                     {{"records", records}, {"loaded", loaded}, {"skipped", skipped_ids.size()}}},
                    {"skipped_ids", skipped_ids},
                    {"warnings", warnings}};
    }
};

namespace detail {

inline json parse_json_or_empty(const std::string &path) {
    std::string text = read_file(path);
    if (trim(text).empty())
        return json::object();
    try {
        return json::parse(text);
    } catch (const json::parse_error &e) {
        throw ParseError(path, e.byte, e.what());
    }
}

inline std::string id_string(const json &v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
}

inline std::vector<std::string> answer_strings(const json &answers) {
    std::vector<std::string> out;
    for (const auto &a : answers)
        out.push_back(a.is_string() ? a.get<std::string>() : a.at("answer").get<std::string>());
    return out;
}

inline void finish(std::vector<Sample> &samples, const std::string &path) {
    std::sort(samples.begin(), samples.end(),
              [](const Sample &a, const Sample &b) { return a.sample_id < b.sample_id; });
    for (std::size_t i = 1; i < samples.size(); ++i)
        if (samples[i].sample_id == samples[i - 1].sample_id)
            throw ParseError(path, 0, "duplicate sample id " + samples[i].sample_id);
}

inline bool valid_sample(const Sample &s) {
    return !trim(s.question).empty() && !s.gold_explanations.empty();
}

} // namespace detail

/// Loads VQA-X.
///
/// `qa_path` is either a VQA-style document with `questions` and `annotations`
/// arrays, or the per-question-id object layout that carries `question`,
/// `answers`, `image_id` and optionally inline `explanation` lists.
/// `explanations_path` maps question id to a list of explanations; when empty,
/// inline explanations are used. Questions without any explanation are skipped
/// and listed in the report.
inline std::vector<Sample> load_vqax(const std::string &qa_path,
                                     const std::string &explanations_path,
                                     LoadReport *report = nullptr, Split split = Split::val) {
    LoadReport local;
    LoadReport &rep = report ? *report : local;
    json qa = parse_json_file(qa_path);
    json explanations =
        explanations_path.empty() ? json::object() : detail::parse_json_or_empty(explanations_path);
    if (!explanations.is_object())
        throw ParseError(explanations_path, 0, "explanations must be an object keyed by question id");

    struct Raw {
        std::string id;
        Sample s;
    };
    std::vector<Raw> raws;
    try {
        if (qa.is_object() && qa.contains("questions")) {
            std::map<std::string, json> answers;
            if (qa.contains("annotations"))
                for (const auto &a : qa["annotations"])
                    answers[detail::id_string(a.at("question_id"))] = a;
            for (const auto &q : qa.at("questions")) {
                Raw r;
                r.id = detail::id_string(q.at("question_id"));
                r.s.image_id = q.at("image_id").get<std::int64_t>();
                r.s.question = q.at("question").get<std::string>();
                if (auto it = answers.find(r.id); it != answers.end())
                    r.s.gold_answers = detail::answer_strings(it->second.at("answers"));
                raws.push_back(std::move(r));
            }
        } else if (qa.is_object()) {
            for (auto it = qa.begin(); it != qa.end(); ++it) {
                Raw r;
                r.id = it.key();
                const json &q = it.value();
                r.s.image_id = q.at("image_id").get<std::int64_t>();
                r.s.question = q.at("question").get<std::string>();
                if (q.contains("answers"))
                    r.s.gold_answers = detail::answer_strings(q["answers"]);
                if (q.contains("explanation"))
                    r.s.gold_explanations = q["explanation"].get<std::vector<std::string>>();
                raws.push_back(std::move(r));
            }
        } else {
            throw ParseError(qa_path, 0, "unrecognized VQA-X layout");
        }
    } catch (const json::exception &e) {
        throw ParseError(qa_path, 0, e.what());
    }

    std::vector<Sample> samples;
    rep.records += raws.size();
    for (auto &r : raws) {
        if (auto it = explanations.find(r.id); it != explanations.end()) {
            try {
                r.s.gold_explanations = it->get<std::vector<std::string>>();
            } catch (const json::exception &e) {
                throw ParseError(explanations_path, 0, "question " + r.id + ": " + e.what());
            }
        }
        r.s.sample_id = r.id;
        r.s.image_ref = std::to_string(r.s.image_id);
        r.s.split = split;
        if (!detail::valid_sample(r.s)) {
            rep.skipped_ids.push_back(r.id);
            rep.warnings.push_back("question " + r.id +
                                   (trim(r.s.question).empty() ? ": empty question"
                                                               : ": no explanation"));
            continue;
        }
        samples.push_back(std::move(r.s));
    }
    detail::finish(samples, qa_path);
    rep.loaded += samples.size();
    return samples;
}

/// Loads an A-OKVQA split file (a JSON array of records). Rationales become
/// the gold explanations and `direct_answers` the gold answers.
inline std::vector<Sample> load_aokvqa(const std::string &path, LoadReport *report = nullptr,
                                       Split split = Split::val) {
    LoadReport local;
    LoadReport &rep = report ? *report : local;
    json doc = parse_json_file(path);
    if (!doc.is_array())
        throw ParseError(path, 0, "A-OKVQA file must be a JSON array");
    std::vector<Sample> samples;
    rep.records += doc.size();
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const json &rec = doc[i];
        std::string name = rec.contains("question_id") ? detail::id_string(rec["question_id"])
                                                       : "#" + std::to_string(i);
        try {
            if (!rec.contains("rationales"))
                throw ParseError(path, 0, "record " + name + ": missing field 'rationales'");
            Sample s;
            s.sample_id = detail::id_string(rec.at("question_id"));
            s.image_id = rec.at("image_id").get<std::int64_t>();
            s.image_ref = std::to_string(s.image_id);
            s.question = rec.at("question").get<std::string>();
            s.gold_explanations = rec.at("rationales").get<std::vector<std::string>>();
            if (rec.contains("direct_answers"))
                s.gold_answers = rec["direct_answers"].get<std::vector<std::string>>();
            else if (rec.contains("choices") && rec.contains("correct_choice_idx"))
                s.gold_answers = {rec["choices"].at(rec["correct_choice_idx"].get<std::size_t>())
                                      .get<std::string>()};
            s.split = rec.contains("split") ? parse_split(rec["split"].get<std::string>()) : split;
            if (!detail::valid_sample(s)) {
                rep.skipped_ids.push_back(s.sample_id);
                rep.warnings.push_back("record " + name + ": empty question or rationales");
                continue;
            }
            samples.push_back(std::move(s));
        } catch (const json::exception &e) {
            throw ParseError(path, 0, "record " + name + ": " + e.what());
        }
    }
    detail::finish(samples, path);
    rep.loaded += samples.size();
    return samples;
}

/// Flags every sample whose image is absent from the annotation index.
inline std::size_t cross_check_images(const std::vector<Sample> &samples,
                                      const AnnotationIndex &index, LoadReport &report) {
    std::size_t missing = 0;
    for (const auto &s : samples) {
        if (!index.find(s.image_id)) {
            ++missing;
            report.warnings.push_back("sample " + s.sample_id + ": image " + s.image_ref +
                                      " not in annotations");
        }
    }
    return missing;
}

} // namespace vqaadv
