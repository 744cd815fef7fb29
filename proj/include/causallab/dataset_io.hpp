#pragma once

// Dataset files: line-delimited JSON. Line 0 is a header record
//
//   {"schema_version":1,"k_x":..,"k_y":..,"n_items":..,"seed":..,
//    "hyperprior":{"alpha_max":..,"n_components":..,"seed":..},
//    "variant":"canonical"}
//
// followed by one record per item
//
//   {"label":<code 0-5>,"h":<|H| or -1>,"p":[k_x*k_y doubles, row-major]}
//
// Doubles are written with 17 significant digits, so a save/load round
// trip is bit-exact.

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "causallab/causal_sampler.hpp"
#include "causallab/errors.hpp"

namespace causallab {

inline constexpr int kDatasetSchemaVersion = 1;

namespace detail {

inline void append_double(std::string& out, double v) {
    char buf[32];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    out.append(buf, static_cast<std::size_t>(n));
}

inline nlohmann::json to_json(const HyperpriorDescriptor& h) {
    return {{"alpha_max", h.alpha_max}, {"n_components", h.n_components}, {"seed", h.seed}};
}

inline HyperpriorDescriptor hyperprior_from_json(const nlohmann::json& j) {
    HyperpriorDescriptor h;
    h.alpha_max = j.at("alpha_max").get<double>();
    h.n_components = j.at("n_components").get<std::size_t>();
    h.seed = j.at("seed").get<std::uint64_t>();
    return h;
}

} // namespace detail

inline void save_dataset(const LabeledDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    const nlohmann::json header = {
        {"schema_version", kDatasetSchemaVersion},
        {"k_x", ds.k_x()},
        {"k_y", ds.k_y()},
        {"n_items", ds.size()},
        {"seed", ds.seed()},
        {"hyperprior", detail::to_json(ds.hyperprior())},
        {"variant", std::string(name(ds.variant()))},
    };
    out << header.dump() << '\n';
    std::string line;
    for (const auto& item : ds.items()) {
        line.clear();
        line += "{\"label\":" + std::to_string(code(item.label));
        line += ",\"h\":" + std::to_string(item.h_cardinality.value_or(-1));
        line += ",\"p\":[";
        const auto p = item.joint.entries();
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (i) line += ',';
            detail::append_double(line, p[i]);
        }
        line += "]}\n";
        out << line;
    }
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline LabeledDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing header record", 0);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed header: ") + e.what(), 0);
    }
    if (!header.is_object() || !header.contains("schema_version")) {
        throw ParseError("header has no schema_version", 0);
    }
    if (header["schema_version"] != kDatasetSchemaVersion) {
        throw ParseError("unsupported schema version " + header["schema_version"].dump(), 0);
    }
    std::size_t k_x = 0;
    std::size_t k_y = 0;
    std::size_t n_items = 0;
    std::uint64_t seed = 0;
    HyperpriorDescriptor hp;
    ConfoundingVariant variant = ConfoundingVariant::kCanonical;
    try {
        k_x = header.at("k_x").get<std::size_t>();
        k_y = header.at("k_y").get<std::size_t>();
        n_items = header.at("n_items").get<std::size_t>();
        seed = header.at("seed").get<std::uint64_t>();
        hp = detail::hyperprior_from_json(header.at("hyperprior"));
        variant = parse_variant(header.value("variant", std::string("canonical")));
    } catch (const std::exception& e) {
        throw ParseError(std::string("bad header field: ") + e.what(), 0);
    }

    std::vector<LabeledDistribution> items;
    items.reserve(n_items);
    std::size_t record = 1;
    for (; record <= n_items; ++record) {
        if (!std::getline(in, line)) {
            throw ParseError("truncated file: expected " + std::to_string(n_items) +
                                 " item records, found " + std::to_string(record - 1),
                             record);
        }
        try {
            const auto j = nlohmann::json::parse(line);
            const auto label = structure_from_code(j.at("label").get<int>());
            const int h = j.at("h").get<int>();
            auto p = j.at("p").get<std::vector<double>>();
            std::optional<int> h_card;
            if (h >= 0) h_card = h;
            items.push_back({JointTable(k_x, k_y, std::move(p)), label, h_card, hp});
        } catch (const std::exception& e) {
            throw ParseError(std::string("bad item record: ") + e.what(), record);
        }
    }
    while (std::getline(in, line)) {
        if (!line.empty()) throw ParseError("unexpected record after the last item", record);
        ++record;
    }
    try {
        return LabeledDataset(k_x, k_y, std::move(items), seed, hp, variant);
    } catch (const InvariantError& e) {
        throw ParseError(e.what(), 0);
    }
}

} // namespace causallab
