#pragma once

#include <cstddef>
#include <list>
#include <optional>
#include <unordered_map>
#include <utility>

namespace npusim {

/// Fixed-capacity map with strict LRU replacement. Front of the list is MRU.
template <class Key, class Value>
class LruMap {
  public:
    explicit LruMap(std::size_t capacity) : capacity_(capacity) {}

    /// Lookup that promotes the entry to MRU on a hit.
    std::optional<Value> touch(const Key &k)
    {
        auto it = index_.find(k);
        if (it == index_.end())
            return std::nullopt;
        order_.splice(order_.begin(), order_, it->second);
        return it->second->second;
    }

    /// Lookup without changing recency.
    const Value *peek(const Key &k) const
    {
        auto it = index_.find(k);
        return it == index_.end() ? nullptr : &it->second->second;
    }

    bool contains(const Key &k) const { return index_.count(k) != 0; }

    /// Inserts or overwrites as MRU; evicts the LRU entry when full.
    void insert(const Key &k, const Value &v)
    {
        if (capacity_ == 0)
            return;
        auto it = index_.find(k);
        if (it != index_.end()) {
            it->second->second = v;
            order_.splice(order_.begin(), order_, it->second);
            return;
        }
        if (order_.size() == capacity_) {
            index_.erase(order_.back().first);
            order_.pop_back();
        }
        order_.emplace_front(k, v);
        index_[k] = order_.begin();
    }

    bool erase(const Key &k)
    {
        auto it = index_.find(k);
        if (it == index_.end())
            return false;
        order_.erase(it->second);
        index_.erase(it);
        return true;
    }

    std::size_t size() const { return order_.size(); }
    std::size_t capacity() const { return capacity_; }

    /// Entries from MRU to LRU.
    const std::list<std::pair<Key, Value>> &entries() const { return order_; }

  private:
    std::size_t capacity_;
    std::list<std::pair<Key, Value>> order_;
    std::unordered_map<Key, typename std::list<std::pair<Key, Value>>::iterator> index_;
};

} // namespace npusim
