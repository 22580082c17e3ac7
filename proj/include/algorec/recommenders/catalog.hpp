#pragma once

#include "algorec/kb.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace algorec::rec {

using ConfigIndex = std::uint32_t;
using DatasetIndex = std::uint32_t;

/// The enumerated configuration space, indexed in ascending config_id order,
/// so comparing indices is the canonical tie-break.
class Catalog {
public:
    explicit Catalog(kb::ConfigSpace space);

    [[nodiscard]] std::size_t size() const { return configs_.size(); }
    [[nodiscard]] const kb::ConfigSpace& space() const { return space_; }

    [[nodiscard]] const kb::AlgorithmConfig& config(ConfigIndex i) const { return configs_[i]; }
    [[nodiscard]] const std::string& id(ConfigIndex i) const { return ids_[i]; }

    [[nodiscard]] std::optional<ConfigIndex> find(const std::string& config_id) const;
    /// Throws ValidationError when the config is not part of the space.
    [[nodiscard]] ConfigIndex index_of(const kb::AlgorithmConfig& config) const;

    [[nodiscard]] std::size_t algorithm_count() const { return algorithm_names_.size(); }
    [[nodiscard]] const std::string& algorithm_name(std::size_t algorithm) const { return algorithm_names_[algorithm]; }
    [[nodiscard]] std::size_t algorithm_of(ConfigIndex i) const { return algorithm_of_[i]; }
    [[nodiscard]] const std::vector<ConfigIndex>& configs_of_algorithm(std::size_t algorithm) const {
        return members_[algorithm];
    }

private:
    kb::ConfigSpace space_;
    std::vector<kb::AlgorithmConfig> configs_;
    std::vector<std::string> ids_;
    std::unordered_map<std::string, ConfigIndex> by_id_;
    std::vector<std::string> algorithm_names_;
    std::vector<std::size_t> algorithm_of_;
    std::vector<std::vector<ConfigIndex>> members_;
};

}  // namespace algorec::rec
