#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace endoclass {

// Ordered list of class names. The order is canonical: it fixes the column
// order of every CSV/JSON artifact and the meaning of label indices.
struct ClassCatalog {
    std::vector<std::string> names;

    ClassCatalog() = default;
    explicit ClassCatalog(std::vector<std::string> n) : names(std::move(n)) { validate(); }

    std::size_t size() const { return names.size(); }

    // Index of `name`, or -1 if absent.
    int index_of(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return static_cast<int>(i);
        return -1;
    }

    void validate() const {
        if (names.size() < 2) throw std::invalid_argument("class catalog needs at least 2 classes");
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (names[i].empty()) throw std::invalid_argument("class catalog contains an empty name");
            for (std::size_t j = i + 1; j < names.size(); ++j)
                if (names[i] == names[j])
                    throw std::invalid_argument("duplicate class name '" + names[i] + "' in catalog");
        }
    }

    bool operator==(const ClassCatalog& other) const { return names == other.names; }
};

// Ten-class GI abnormality catalog, alphabetical with Normal in place.
inline ClassCatalog default_catalog() {
    return ClassCatalog({"Angioectasia", "Bleeding", "Erosion", "Erythema", "Foreign Body",
                         "Lymphangiectasia", "Normal", "Polyp", "Ulcer", "Worms"});
}

struct ManifestRecord {
    std::string image_id;  // relative path
    int label = 0;         // index into the catalog
};

// Ordered dataset manifest: one record per image, labels already mapped to
// catalog indices. image_id values are unique.
struct LabeledManifest {
    std::vector<ManifestRecord> records;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }

    std::vector<int> labels() const {
        std::vector<int> out;
        out.reserve(records.size());
        for (const auto& r : records) out.push_back(r.label);
        return out;
    }
};

}  // namespace endoclass
