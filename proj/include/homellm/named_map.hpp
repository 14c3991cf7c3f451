#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace homellm {

// Insertion-ordered string-keyed map. Context documents are small (tens of
// entries), so linear lookup is fine and keeps serialization order stable.
template <class T>
class NamedMap {
public:
    using value_type = std::pair<std::string, T>;
    using iterator = typename std::vector<value_type>::iterator;
    using const_iterator = typename std::vector<value_type>::const_iterator;

    NamedMap() = default;
    NamedMap(std::initializer_list<value_type> init) {
        for (auto& kv : init) insert_or_assign(kv.first, kv.second);
    }

    T* find(std::string_view key) {
        auto it = locate(key);
        return it == items_.end() ? nullptr : &it->second;
    }
    const T* find(std::string_view key) const {
        auto it = std::find_if(items_.begin(), items_.end(),
                               [&](const value_type& kv) { return kv.first == key; });
        return it == items_.end() ? nullptr : &it->second;
    }
    bool contains(std::string_view key) const { return find(key) != nullptr; }

    T& at(std::string_view key) {
        if (auto* v = find(key)) return *v;
        throw std::out_of_range("no entry named '" + std::string(key) + "'");
    }
    const T& at(std::string_view key) const {
        if (auto* v = find(key)) return *v;
        throw std::out_of_range("no entry named '" + std::string(key) + "'");
    }

    /// Returns false if the key already existed (value left untouched).
    bool insert(std::string key, T value) {
        if (contains(key)) return false;
        items_.emplace_back(std::move(key), std::move(value));
        return true;
    }

    T& insert_or_assign(std::string key, T value) {
        if (auto* v = find(key)) {
            *v = std::move(value);
            return *v;
        }
        items_.emplace_back(std::move(key), std::move(value));
        return items_.back().second;
    }

    bool erase(std::string_view key) {
        auto it = locate(key);
        if (it == items_.end()) return false;
        items_.erase(it);
        return true;
    }

    std::size_t size() const noexcept { return items_.size(); }
    bool empty() const noexcept { return items_.empty(); }

    iterator begin() { return items_.begin(); }
    iterator end() { return items_.end(); }
    const_iterator begin() const { return items_.begin(); }
    const_iterator end() const { return items_.end(); }

    friend bool operator==(const NamedMap&, const NamedMap&) = default;

private:
    iterator locate(std::string_view key) {
        return std::find_if(items_.begin(), items_.end(),
                            [&](const value_type& kv) { return kv.first == key; });
    }

    std::vector<value_type> items_;
};

} // namespace homellm
