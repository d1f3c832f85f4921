#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "hash.hpp"

namespace vqaadv {

using json = nlohmann::json;

// The 80 object classes of the COCO detection task.
inline constexpr std::array<std::string_view, 80> kCocoCategories = {
    "person",        "bicycle",      "car",           "motorcycle",    "airplane",
    "bus",           "train",        "truck",         "boat",          "traffic light",
    "fire hydrant",  "stop sign",    "parking meter", "bench",         "bird",
    "cat",           "dog",          "horse",         "sheep",         "cow",
    "elephant",      "bear",         "zebra",         "giraffe",       "backpack",
    "umbrella",      "handbag",      "tie",           "suitcase",      "frisbee",
    "skis",          "snowboard",    "sports ball",   "kite",          "baseball bat",
    "baseball glove", "skateboard",  "surfboard",     "tennis racket", "bottle",
    "wine glass",    "cup",          "fork",          "knife",         "spoon",
    "bowl",          "banana",       "apple",         "sandwich",      "orange",
    "broccoli",      "carrot",       "hot dog",       "pizza",         "donut",
    "cake",          "chair",        "couch",         "potted plant",  "bed",
    "dining table",  "toilet",       "tv",            "laptop",        "mouse",
    "remote",        "keyboard",     "cell phone",    "microwave",     "oven",
    "toaster",       "sink",         "refrigerator",  "book",          "clock",
    "vase",          "scissors",     "teddy bear",    "hair drier",    "toothbrush",
};

inline bool is_coco_category(std::string_view name) {
    return std::find(kCocoCategories.begin(), kCocoCategories.end(), name) != kCocoCategories.end();
}

/// Axis-aligned box in pixels, (x, y) top-left.
struct BBox {
    double x = 0, y = 0, w = 0, h = 0;

    double area() const { return w * h; }
    bool operator==(const BBox &) const = default;
};

struct ObjectInstance {
    std::string category;
    BBox bbox;
    double area = 0; // box area after clipping
};

struct ImageEntry {
    std::int64_t image_id = 0;
    std::string file_name;
    int width = 0;
    int height = 0;
    std::vector<ObjectInstance> instances;
};

/// Per-image ground-truth objects keyed by COCO image id.
struct AnnotationIndex {
    std::map<std::int64_t, ImageEntry> images;
    std::vector<std::string> warnings;

    const ImageEntry *find(std::int64_t image_id) const {
        auto it = images.find(image_id);
        return it == images.end() ? nullptr : &it->second;
    }
};

/// Clamps a box into [0, W] x [0, H]. Returns true when the box changed.
inline bool clip_bbox(BBox &b, double width, double height) {
    BBox orig = b;
    double x0 = std::clamp(b.x, 0.0, width);
    double y0 = std::clamp(b.y, 0.0, height);
    double x1 = std::clamp(b.x + b.w, 0.0, width);
    double y1 = std::clamp(b.y + b.h, 0.0, height);
    b = {x0, y0, std::max(0.0, x1 - x0), std::max(0.0, y1 - y0)};
    return !(b == orig);
}

inline json parse_json_file(const std::string &path) {
    std::string text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error &e) {
        throw ParseError(path, e.byte, e.what());
    }
}

inline AnnotationIndex load_coco_annotations_json(const json &doc, const std::string &path) {
    auto require_array = [&](const char *key) -> const json & {
        if (!doc.is_object() || !doc.contains(key) || !doc[key].is_array())
            throw ParseError(path, 0, std::string("missing array '") + key + "'");
        return doc[key];
    };
    std::map<std::int64_t, std::string> category_names;
    for (const auto &c : require_array("categories")) {
        std::string name = c.at("name").get<std::string>();
        if (!is_coco_category(name))
            throw ParseError(path, 0, "category '" + name + "' is not a COCO class");
        category_names[c.at("id").get<std::int64_t>()] = name;
    }

    AnnotationIndex index;
    for (const auto &img : require_array("images")) {
        ImageEntry e;
        e.image_id = img.at("id").get<std::int64_t>();
        e.file_name = img.value("file_name", std::string{});
        e.width = img.at("width").get<int>();
        e.height = img.at("height").get<int>();
        index.images[e.image_id] = std::move(e);
    }

    for (const auto &ann : require_array("annotations")) {
        auto image_id = ann.at("image_id").get<std::int64_t>();
        auto cat_id = ann.at("category_id").get<std::int64_t>();
        auto cat = category_names.find(cat_id);
        if (cat == category_names.end())
            throw ParseError(path, 0, "unknown category id " + std::to_string(cat_id) +
                                          " in annotation " + ann.value("id", json()).dump());
        auto img = index.images.find(image_id);
        if (img == index.images.end())
            throw ParseError(path, 0, "annotation references unknown image " +
                                          std::to_string(image_id));
        const auto &bb = ann.at("bbox");
        if (!bb.is_array() || bb.size() != 4)
            throw ParseError(path, 0, "bbox must have 4 numbers");
        ObjectInstance inst;
        inst.category = cat->second;
        inst.bbox = {bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>(),
                     bb[3].get<double>()};
        if (clip_bbox(inst.bbox, img->second.width, img->second.height))
            index.warnings.push_back("image " + std::to_string(image_id) + ": bbox of annotation " +
                                     ann.value("id", json()).dump() + " clipped to image bounds");
        inst.area = inst.bbox.area();
        img->second.instances.push_back(std::move(inst));
    }
    return index;
}

/// Loads a COCO `instances_*.json` file.
inline AnnotationIndex load_coco_annotations(const std::string &path) {
    json doc = parse_json_file(path);
    try {
        return load_coco_annotations_json(doc, path);
    } catch (const json::exception &e) {
        throw ParseError(path, 0, e.what());
    }
}

} // namespace vqaadv
