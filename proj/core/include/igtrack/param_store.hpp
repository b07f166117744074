#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "igtrack/tensor.hpp"

namespace igtrack {

/// Named learnable arrays kept in insertion order; that order is also the
/// checkpoint order and the gradient-reduction order.
template <class T>
class BasicParamStore {
public:
    using Entry = std::pair<std::string, BasicTensor<T>>;

    void add(std::string name, BasicTensor<T> value) {
        if (contains(name)) throw ConfigError("duplicate parameter '" + name + "'");
        entries_.emplace_back(std::move(name), std::move(value));
    }

    bool contains(std::string_view name) const { return find(name) != nullptr; }

    BasicTensor<T>& at(std::string_view name) {
        return const_cast<BasicTensor<T>&>(std::as_const(*this).at(name));
    }
    const BasicTensor<T>& at(std::string_view name) const {
        const BasicTensor<T>* t = find(name);
        if (!t) throw ConfigError("unknown parameter '" + std::string(name) + "'");
        return *t;
    }

    std::size_t size() const { return entries_.size(); }
    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.second.size();
        return n;
    }
    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }
    Entry& entry(std::size_t i) { return entries_[i]; }
    const Entry& entry(std::size_t i) const { return entries_[i]; }

    /// Same names, order and shapes.
    bool same_layout(const BasicParamStore& other) const {
        if (entries_.size() != other.entries_.size()) return false;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (entries_[i].first != other.entries_[i].first ||
                entries_[i].second.dims() != other.entries_[i].second.dims()) {
                return false;
            }
        }
        return true;
    }

    void require_same_layout(const BasicParamStore& other, const char* what) const {
        if (!same_layout(other)) throw ConfigError(std::string(what) + ": parameter stores differ in keys or shapes");
    }

    BasicParamStore zeros_like() const {
        BasicParamStore out;
        for (const auto& [name, t] : entries_) out.add(name, BasicTensor<T>(t.dims()));
        return out;
    }

    /// this += scale * other, elementwise in store order.
    void add_scaled(const BasicParamStore& other, T scale) {
        require_same_layout(other, "add_scaled");
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            auto& dst = entries_[i].second;
            const auto& src = other.entries_[i].second;
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * src[k];
        }
    }

    void scale(T factor) {
        for (auto& e : entries_) {
            for (T& v : e.second.values()) v *= factor;
        }
    }

    bool all_finite() const {
        for (const auto& e : entries_) {
            if (!e.second.all_finite()) return false;
        }
        return true;
    }

    template <class U>
    BasicParamStore<U> cast() const {
        BasicParamStore<U> out;
        for (const auto& [name, t] : entries_) out.add(name, t.template cast<U>());
        return out;
    }

    friend bool operator==(const BasicParamStore&, const BasicParamStore&) = default;

private:
    const BasicTensor<T>* find(std::string_view name) const {
        for (const auto& e : entries_) {
            if (e.first == name) return &e.second;
        }
        return nullptr;
    }

    std::vector<Entry> entries_;
};

using ParamStore = BasicParamStore<float>;

}  // namespace igtrack
