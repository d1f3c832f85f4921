#pragma once

#include <array>
#include <vector>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "../error.hpp"

namespace vqaadv::backend {

using json = nlohmann::json;

enum class Endpoint {
    mlm_topk,
    mlm_logprob,
    embed_sentence,
    embed_image,
    embed_tokens,
    vqa_generate,
    inpaint,
    llm_complete,
    health,
};

inline constexpr std::array<Endpoint, 9> kAllEndpoints = {
    Endpoint::mlm_topk,    Endpoint::mlm_logprob,  Endpoint::embed_sentence,
    Endpoint::embed_image, Endpoint::embed_tokens, Endpoint::vqa_generate,
    Endpoint::inpaint,     Endpoint::llm_complete, Endpoint::health,
};

inline std::string_view name(Endpoint e) {
    switch (e) {
    case Endpoint::mlm_topk:
        return "mlm/topk";
    case Endpoint::mlm_logprob:
        return "mlm/logprob";
    case Endpoint::embed_sentence:
        return "embed/sentence";
    case Endpoint::embed_image:
        return "embed/image";
    case Endpoint::embed_tokens:
        return "embed/tokens";
    case Endpoint::vqa_generate:
        return "vqa/generate";
    case Endpoint::inpaint:
        return "inpaint";
    case Endpoint::llm_complete:
        return "llm/complete";
    case Endpoint::health:
        return "health";
    }
    return "";
}

inline std::string path(Endpoint e) { return "/v1/" + std::string(name(e)); }

inline Endpoint endpoint_from_name(std::string_view n) {
    for (auto e : kAllEndpoints)
        if (name(e) == n)
            return e;
    throw Error("unknown endpoint '" + std::string(n) + "'");
}

inline bool is_get(Endpoint e) { return e == Endpoint::health; }

namespace schema {

// Field types used by the wire schemas.
enum class Kind {
    string,
    integer,
    number,
    int_array,
    number_array,
    string_array,
    number_matrix,
    slots,
    object,
};

struct Field {
    std::string_view name;
    Kind kind;
};

inline bool is_number_array(const json &v) {
    if (!v.is_array())
        return false;
    for (const auto &x : v)
        if (!x.is_number())
            return false;
    return true;
}

inline bool matches(const json &v, Kind k) {
    switch (k) {
    case Kind::string:
        return v.is_string();
    case Kind::integer:
        return v.is_number_integer();
    case Kind::number:
        return v.is_number();
    case Kind::int_array:
        if (!v.is_array())
            return false;
        for (const auto &x : v)
            if (!x.is_number_integer())
                return false;
        return true;
    case Kind::number_array:
        return is_number_array(v);
    case Kind::string_array:
        if (!v.is_array())
            return false;
        for (const auto &x : v)
            if (!x.is_string())
                return false;
        return true;
    case Kind::number_matrix:
        if (!v.is_array())
            return false;
        for (const auto &row : v)
            if (!is_number_array(row))
                return false;
        return true;
    case Kind::slots:
        if (!v.is_array())
            return false;
        for (const auto &slot : v) {
            if (!slot.is_array())
                return false;
            for (const auto &c : slot)
                if (!c.is_object() || !c.contains("token") || !c["token"].is_string() ||
                    !c.contains("logprob") || !c["logprob"].is_number())
                    return false;
        }
        return true;
    case Kind::object:
        return v.is_object();
    }
    return false;
}

inline std::string_view kind_name(Kind k) {
    switch (k) {
    case Kind::string:
        return "string";
    case Kind::integer:
        return "int";
    case Kind::number:
        return "float";
    case Kind::int_array:
        return "[int]";
    case Kind::number_array:
        return "[float]";
    case Kind::string_array:
        return "[string]";
    case Kind::number_matrix:
        return "[[float]]";
    case Kind::slots:
        return "[[{token, logprob}]]";
    case Kind::object:
        return "object";
    }
    return "";
}

struct Schema {
    std::vector<Field> request;
    std::vector<Field> response;
};

inline const Schema &for_endpoint(Endpoint e) {
    using K = Kind;
    static const Schema topk{{{"text", K::string}, {"mask_positions", K::int_array}, {"k", K::integer}},
                             {{"slots", K::slots}}};
    static const Schema logprob{
        {{"text", K::string}, {"positions", K::int_array}, {"targets", K::string_array}},
        {{"logprobs", K::number_array}}};
    static const Schema sentence{{{"texts", K::string_array}}, {{"vectors", K::number_matrix}}};
    static const Schema image{{{"images_png_b64", K::string_array}}, {{"vectors", K::number_matrix}}};
    static const Schema tokens{{{"text", K::string}},
                               {{"tokens", K::string_array}, {"vectors", K::number_matrix}}};
    static const Schema generate{
        {{"image_png_b64", K::string}, {"input_text", K::string}, {"max_tokens", K::integer}},
        {{"text", K::string}}};
    static const Schema inpaint{{{"image_png_b64", K::string}, {"mask_png_b64", K::string}},
                                {{"image_png_b64", K::string}}};
    static const Schema complete{
        {{"prompt", K::string}, {"max_tokens", K::integer}, {"temperature", K::number}},
        {{"text", K::string}}};
    static const Schema health{{},
                               {{"name", K::string}, {"models", K::object},
                                {"protocol_version", K::string}}};
    switch (e) {
    case Endpoint::mlm_topk:
        return topk;
    case Endpoint::mlm_logprob:
        return logprob;
    case Endpoint::embed_sentence:
        return sentence;
    case Endpoint::embed_image:
        return image;
    case Endpoint::embed_tokens:
        return tokens;
    case Endpoint::vqa_generate:
        return generate;
    case Endpoint::inpaint:
        return inpaint;
    case Endpoint::llm_complete:
        return complete;
    case Endpoint::health:
        return health;
    }
    throw Error("no schema");
}

inline void check(Endpoint e, const json &body, const std::vector<Field> &fields,
                  std::string_view direction) {
    std::string ep = std::string(name(e)) + " " + std::string(direction);
    if (!body.is_object())
        throw SchemaError(ep, "<body>", "must be a JSON object");
    for (const auto &f : fields) {
        if (!body.contains(f.name))
            throw SchemaError(ep, std::string(f.name), "missing required field");
        if (!matches(body[std::string(f.name)], f.kind))
            throw SchemaError(ep, std::string(f.name),
                              "expected " + std::string(kind_name(f.kind)));
    }
}

} // namespace schema

inline void validate_request(Endpoint e, const json &body) {
    schema::check(e, body, schema::for_endpoint(e).request, "request");
}

inline void validate_response(Endpoint e, const json &body) {
    schema::check(e, body, schema::for_endpoint(e).response, "response");
    if (e == Endpoint::health && body["protocol_version"] != "1")
        throw SchemaError(std::string(name(e)) + " response", "protocol_version",
                          "unsupported protocol version");
}

} // namespace vqaadv::backend
