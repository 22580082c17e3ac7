#include "algorec/recommenders/catalog.hpp"

#include "algorec/errors.hpp"

#include <algorithm>
#include <numeric>

namespace algorec::rec {

Catalog::Catalog(kb::ConfigSpace space) : space_(std::move(space)) {
    auto configs = kb::enumerate_space(space_);
    std::vector<std::string> ids;
    ids.reserve(configs.size());
    for (const auto& c : configs) {
        ids.push_back(c.config_id());
    }
    std::vector<std::size_t> order(configs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });

    for (const auto& grid : space_.algorithms()) {
        algorithm_names_.push_back(grid.algorithm);
    }
    members_.resize(algorithm_names_.size());

    configs_.reserve(configs.size());
    ids_.reserve(configs.size());
    for (std::size_t i : order) {
        const auto index = static_cast<ConfigIndex>(configs_.size());
        const auto alg = static_cast<std::size_t>(
            std::lower_bound(algorithm_names_.begin(), algorithm_names_.end(), configs[i].algorithm) -
            algorithm_names_.begin());
        by_id_.emplace(ids[i], index);
        algorithm_of_.push_back(alg);
        members_[alg].push_back(index);
        configs_.push_back(std::move(configs[i]));
        ids_.push_back(std::move(ids[i]));
    }
}

std::optional<ConfigIndex> Catalog::find(const std::string& config_id) const {
    auto it = by_id_.find(config_id);
    if (it == by_id_.end()) {
        return std::nullopt;
    }
    return it->second;
}

ConfigIndex Catalog::index_of(const kb::AlgorithmConfig& config) const {
    const auto id = config.config_id();
    if (auto i = find(id)) {
        return *i;
    }
    throw ValidationError("config '" + id + "' is not part of the configuration space");
}

}  // namespace algorec::rec
