#pragma once

// Word-list datasets and the long-format analysis table. A BiasDataset groups
// protected words by stereotype class, attaches class-labelled attribute sets
// and the neutral/human control lists; build_long_table joins it against an
// embedding into one row per (protected word, attribute) with the association
// category and cosine distance.

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "embias/embedding.hpp"
#include "embias/geometry.hpp"

namespace embias::datasets {

class DatasetError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class AssociationCategory { associated, different, human, neutral };

inline constexpr std::array<AssociationCategory, 4> k_categories = {
    AssociationCategory::associated, AssociationCategory::different,
    AssociationCategory::human, AssociationCategory::neutral};

inline std::string_view to_string(AssociationCategory c) {
    switch (c) {
        case AssociationCategory::associated: return "associated";
        case AssociationCategory::different: return "different";
        case AssociationCategory::human: return "human";
        case AssociationCategory::neutral: return "neutral";
    }
    return "?";
}

inline AssociationCategory category_from_string(std::string_view s) {
    for (auto c : k_categories)
        if (to_string(c) == s) return c;
    throw DatasetError("unknown association category '" + std::string(s) + "'");
}

struct AttributeSet {
    std::string id;
    std::string class_id;
    std::vector<std::string> tokens;
};

struct BiasDataset {
    std::string name;
    std::vector<std::pair<std::string, std::string>> protected_words;  // (token, class id)
    std::vector<AttributeSet> attribute_sets;
    std::vector<std::string> neutral;
    std::vector<std::string> human;

    std::vector<std::string> class_ids() const {
        std::vector<std::string> out;
        for (const auto& [tok, cls] : protected_words)
            if (std::find(out.begin(), out.end(), cls) == out.end()) out.push_back(cls);
        return out;
    }

    std::vector<std::string> protected_of_class(std::string_view cls) const {
        std::vector<std::string> out;
        for (const auto& [tok, c] : protected_words)
            if (c == cls) out.push_back(tok);
        return out;
    }

    std::vector<std::string> attributes_of_class(std::string_view cls) const {
        std::vector<std::string> out;
        for (const auto& s : attribute_sets)
            if (s.class_id == cls) out.insert(out.end(), s.tokens.begin(), s.tokens.end());
        return out;
    }

    std::size_t n_stereotype_attributes() const {
        std::size_t n = 0;
        for (const auto& s : attribute_sets) n += s.tokens.size();
        return n;
    }
};

struct LongRow {
    std::string protected_token;
    std::string attribute_token;
    AssociationCategory category;
    double distance;
};

struct LongTable {
    std::vector<LongRow> rows;
    std::vector<std::string> skipped_tokens;  // set when a skip policy dropped tokens
};

namespace detail {

inline BiasDataset parse_dataset_json(const nlohmann::ordered_json& doc, const std::string& name,
                                      const std::string& origin) {
    const auto fail = [&](const std::string& what) -> void {
        throw DatasetError(origin + ": " + what);
    };
    if (!doc.is_object()) fail("top-level JSON value must be an object");
    for (const char* key : {"protected_classes", "attribute_sets", "neutral", "human"})
        if (!doc.contains(key)) fail(std::string("missing key '") + key + "'");

    BiasDataset ds;
    ds.name = name;

    const auto& pc = doc.at("protected_classes");
    if (!pc.is_object() || pc.empty()) fail("'protected_classes' must be a non-empty object");
    std::set<std::string> protected_seen;
    std::set<std::string> classes;
    for (const auto& [cls, toks] : pc.items()) {
        classes.insert(cls);
        if (!toks.is_array() || toks.empty())
            fail("protected class '" + cls + "' must list at least one token");
        for (const auto& t : toks) {
            if (!t.is_string()) fail("protected tokens must be strings");
            const std::string tok = t.get<std::string>();
            if (!protected_seen.insert(tok).second)
                fail("protected token '" + tok + "' appears more than once");
            ds.protected_words.emplace_back(tok, cls);
        }
    }

    const auto& as = doc.at("attribute_sets");
    if (!as.is_object() || as.empty()) fail("'attribute_sets' must be a non-empty object");
    std::set<std::string> attr_seen;
    for (const auto& [sid, spec] : as.items()) {
        if (!spec.is_object() || !spec.contains("class") || !spec.contains("tokens"))
            fail("attribute set '" + sid + "' must have 'class' and 'tokens'");
        AttributeSet set;
        set.id = sid;
        set.class_id = spec.at("class").get<std::string>();
        if (!classes.count(set.class_id))
            fail("attribute set '" + sid + "' references unknown class '" + set.class_id + "'");
        if (!spec.at("tokens").is_array() || spec.at("tokens").empty())
            fail("attribute set '" + sid + "' must list at least one token");
        for (const auto& t : spec.at("tokens")) {
            const std::string tok = t.get<std::string>();
            if (!attr_seen.insert(tok).second)
                fail("token '" + tok + "' appears in two attribute sets");
            set.tokens.push_back(tok);
        }
        ds.attribute_sets.push_back(std::move(set));
    }

    const auto read_list = [&](const char* key, std::vector<std::string>& out) {
        const auto& arr = doc.at(key);
        if (!arr.is_array()) fail(std::string("'") + key + "' must be an array");
        std::set<std::string> seen;
        for (const auto& t : arr) {
            const std::string tok = t.get<std::string>();
            if (!seen.insert(tok).second) fail(std::string("duplicate token '") + tok + "' in " + key);
            if (attr_seen.count(tok))
                fail(std::string("token '") + tok + "' appears in both " + key +
                     " and an attribute set");
            out.push_back(tok);
        }
    };
    read_list("neutral", ds.neutral);
    read_list("human", ds.human);
    for (const auto& t : ds.neutral)
        if (std::find(ds.human.begin(), ds.human.end(), t) != ds.human.end())
            fail("token '" + t + "' appears in both neutral and human lists");
    return ds;
}

#include "embias/builtin_data.inc"

}  // namespace detail

inline std::vector<std::string> builtin_dataset_names() {
    return {"religion", "gender", "race", "weat1", "weat7"};
}

inline BiasDataset builtin_dataset(const std::string& name) {
    const char* json = nullptr;
    if (name == "religion") json = detail::k_religion_json;
    else if (name == "gender") json = detail::k_gender_json;
    else if (name == "race") json = detail::k_race_json;
    else if (name == "weat1") json = detail::k_weat1_json;
    else if (name == "weat7") json = detail::k_weat7_json;
    if (json == nullptr) throw DatasetError("unknown builtin dataset '" + name + "'");
    return detail::parse_dataset_json(nlohmann::ordered_json::parse(json), name,
                                      "builtin dataset '" + name + "'");
}

inline BiasDataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open '" + path + "'");
    nlohmann::ordered_json doc;
    try {
        doc = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw DatasetError(path + ": " + e.what());
    }
    std::string name = path;
    const auto slash = name.find_last_of('/');
    if (slash != std::string::npos) name = name.substr(slash + 1);
    const auto dot = name.find_last_of('.');
    if (dot != std::string::npos) name = name.substr(0, dot);
    return detail::parse_dataset_json(doc, name, path);
}

// One row per (protected word, attribute) across the stereotype sets
// (associated when class ids match, different otherwise), the neutral list
// and the human list. Rows come out sorted by protected token, then category,
// then attribute token. With skip_missing, unresolvable tokens are dropped
// column-wise and recorded; without it the first miss is an error.
inline LongTable build_long_table(const BiasDataset& ds, const Embedding& emb, bool skip_missing) {
    LongTable table;
    std::set<std::string> skipped;

    const auto resolve = [&](const std::string& token) -> LookupResult {
        LookupResult r = emb.lookup(token);
        if (!r.found()) {
            if (!skip_missing)
                throw DatasetError("token '" + token + "' not found in embedding (use a skip policy to drop it)");
            skipped.insert(token);
        }
        return r;
    };

    struct ResolvedProtected {
        std::string token;
        std::string class_id;
        std::span<const float> vec;
    };
    std::vector<ResolvedProtected> prot;
    for (const auto& [tok, cls] : ds.protected_words) {
        LookupResult r = resolve(tok);
        if (r.found()) prot.push_back({tok, cls, r.vec()});
    }
    if (prot.empty()) throw DatasetError("no protected word resolvable in the embedding");

    struct ResolvedAttr {
        std::string token;
        const AttributeSet* set;       // null for control lists
        AssociationCategory control;   // used when set == nullptr
        std::span<const float> vec;
    };
    std::vector<ResolvedAttr> attrs;
    for (const auto& set : ds.attribute_sets) {
        std::size_t kept = 0;
        for (const auto& tok : set.tokens) {
            LookupResult r = resolve(tok);
            if (r.found()) {
                attrs.push_back({tok, &set, AssociationCategory::associated, r.vec()});
                ++kept;
            }
        }
        if (kept == 0)
            throw DatasetError("attribute set '" + set.id + "' is empty after skipping missing tokens");
    }
    const auto add_control = [&](const std::vector<std::string>& list, AssociationCategory cat) {
        std::size_t kept = 0;
        for (const auto& tok : list) {
            LookupResult r = resolve(tok);
            if (r.found()) {
                attrs.push_back({tok, nullptr, cat, r.vec()});
                ++kept;
            }
        }
        if (!list.empty() && kept == 0)
            throw DatasetError(std::string(to_string(cat)) + " list is empty after skipping missing tokens");
    };
    add_control(ds.neutral, AssociationCategory::neutral);
    add_control(ds.human, AssociationCategory::human);

    for (const auto& p : prot) {
        for (const auto& a : attrs) {
            AssociationCategory cat;
            if (a.set != nullptr) {
                cat = (a.set->class_id == p.class_id) ? AssociationCategory::associated
                                                      : AssociationCategory::different;
            } else {
                cat = a.control;
            }
            table.rows.push_back(
                {p.token, a.token, cat, geometry::cosine_distance(p.vec, a.vec)});
        }
    }

    std::sort(table.rows.begin(), table.rows.end(), [](const LongRow& a, const LongRow& b) {
        if (a.protected_token != b.protected_token) return a.protected_token < b.protected_token;
        if (a.category != b.category) return static_cast<int>(a.category) < static_cast<int>(b.category);
        return a.attribute_token < b.attribute_token;
    });
    table.skipped_tokens.assign(skipped.begin(), skipped.end());
    return table;
}

// CSV columns: protected,attribute,category,distance (9-decimal fixed point).
inline std::string long_table_csv(const LongTable& table) {
    std::string out = "protected,attribute,category,distance\n";
    char buf[32];
    for (const auto& r : table.rows) {
        std::snprintf(buf, sizeof(buf), "%.9f", r.distance);
        out += r.protected_token;
        out += ',';
        out += r.attribute_token;
        out += ',';
        out += to_string(r.category);
        out += ',';
        out += buf;
        out += '\n';
    }
    return out;
}

}  // namespace embias::datasets
