#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ggssm/errors.hpp"

namespace ggssm {

// Soft heap after Kaplan and Zwick's simplified formulation: binary-tree
// nodes carry item lists sharing one current key, and "car-pooling" at even
// ranks above a threshold raises (corrupts) keys of at most
// ceil(epsilon * insertions) stored items at any time. All operations are
// deterministic for a fixed insertion sequence.
//
// Keys only rise, so an item is corrupted exactly when the key of the node
// list holding it exceeds the item's original key.
template <class Key, class Payload, class Less = std::less<Key>>
class SoftHeap {
 public:
  explicit SoftHeap(double epsilon, Less less = Less{}) : less_(less) {
    if (!(epsilon > 0.0 && epsilon < 1.0))
      throw ConfigError("soft heap epsilon must lie in (0, 1)");
    epsilon_ = epsilon;
    // Ranks at or below the threshold never double-fill and stay corruption
    // free; 64 ranks cover any feasible insertion count.
    threshold_ = static_cast<uint32_t>(std::ceil(std::log2(3.0 / epsilon)));
    roots_.assign(64, kNil);
  }

  struct Extracted {
    Payload payload;
    Key original_key;
    bool was_corrupted;
  };

  void insert(const Key& key, const Payload& payload) {
    uint32_t item = new_item(key, payload);
    uint32_t node = new_node();
    Node& n = nodes_[node];
    n.ckey = key;
    n.rank = 0;
    n.head = n.tail = item;
    n.list_len = 1;
    n.virgin = 1;
    ++insertions_;
    ++size_;
    // Binomial-style carry: at most one root per rank.
    uint32_t rank = 0;
    while (roots_[rank] != kNil) {
      node = combine(roots_[rank], node);
      roots_[rank] = kNil;
      ++rank;
    }
    roots_[rank] = node;
  }

  Extracted extract_min() {
    if (size_ == 0) throw EmptyStructureError("extract_min on empty soft heap");
    uint32_t slot = min_root_slot();
    uint32_t x = roots_[slot];
    Node& n = nodes_[x];
    uint32_t item = n.head;
    n.head = items_[item].next;
    if (n.head == kNil) n.tail = kNil;
    --n.list_len;
    Extracted out{items_[item].payload, items_[item].okey, less_(items_[item].okey, n.ckey)};
    if (out.was_corrupted) {
      --corrupted_;
    } else {
      --n.virgin;
    }
    --size_;
    if (n.list_len == 0) {
      if (n.left == kNil) {
        roots_[slot] = kNil;  // spent leaf root
        release_node(x);
      } else {
        defill(x);
      }
    }
    return out;
  }

  bool empty() const { return size_ == 0; }
  uint64_t size() const { return size_; }
  uint64_t insertions() const { return insertions_; }
  // Items currently stored whose key was raised above their original key.
  uint64_t corrupted_count() const { return corrupted_; }
  double epsilon() const { return epsilon_; }

  // Walks every stored item; used to surface still-corrupted items without
  // draining (the MST verification pass) and by tests.
  template <class Fn>
  void for_each_item(Fn&& fn) const {
    for (uint32_t r = 0; r < roots_.size(); ++r) {
      if (roots_[r] != kNil) walk(roots_[r], fn);
    }
  }

 private:
  static constexpr uint32_t kNil = 0xFFFFFFFFu;

  struct Item {
    Key okey;
    Payload payload;
    uint32_t next;
  };

  struct Node {
    Key ckey{};
    uint32_t left = kNil;
    uint32_t right = kNil;
    uint32_t head = kNil;
    uint32_t tail = kNil;
    uint32_t list_len = 0;
    uint32_t virgin = 0;  // items with okey == ckey
    uint32_t rank = 0;
  };

  uint32_t new_item(const Key& key, const Payload& payload) {
    uint32_t idx;
    if (free_item_ != kNil) {
      idx = free_item_;
      free_item_ = items_[idx].next;
      items_[idx].okey = key;
      items_[idx].payload = payload;
      items_[idx].next = kNil;
    } else {
      idx = static_cast<uint32_t>(items_.size());
      items_.push_back({key, payload, kNil});
    }
    return idx;
  }

  uint32_t new_node() {
    if (free_node_ != kNil) {
      uint32_t idx = free_node_;
      free_node_ = nodes_[idx].left;
      nodes_[idx] = Node{};
      return idx;
    }
    nodes_.push_back(Node{});
    return static_cast<uint32_t>(nodes_.size() - 1);
  }

  void release_node(uint32_t idx) {
    nodes_[idx].left = free_node_;
    free_node_ = idx;
  }

  uint32_t combine(uint32_t a, uint32_t b) {
    uint32_t z = new_node();
    Node& n = nodes_[z];
    n.left = a;
    n.right = b;
    n.rank = nodes_[a].rank + 1;
    defill(z);
    return z;
  }

  void defill(uint32_t x) {
    fill(x);
    Node& n = nodes_[x];
    if (n.rank > threshold_ && (n.rank & 1u) == 0 && n.left != kNil) fill(x);
  }

  // Moves the smaller child's item list up into x and recurses to refill
  // that child. Raising x's key corrupts every virgin item already in x's
  // list; arriving items keep their key, so their status is unchanged.
  void fill(uint32_t x) {
    Node& n = nodes_[x];
    if (n.left == kNil || (n.right != kNil && less_(nodes_[n.right].ckey, nodes_[n.left].ckey)))
      std::swap(n.left, n.right);
    Node& child = nodes_[n.left];
    if (n.list_len == 0) {
      n.head = child.head;
      n.tail = child.tail;
      n.virgin = child.virgin;
    } else {
      if (less_(n.ckey, child.ckey)) {  // key strictly rises
        corrupted_ += n.virgin;
        n.virgin = child.virgin;
      } else {
        n.virgin += child.virgin;
      }
      if (child.head != kNil) {
        items_[n.tail].next = child.head;
        n.tail = child.tail;
      }
    }
    n.ckey = child.ckey;
    n.list_len += child.list_len;
    child.head = child.tail = kNil;
    child.list_len = 0;
    child.virgin = 0;
    if (child.left == kNil) {  // spent shell
      uint32_t dead = n.left;
      n.left = n.right;
      n.right = kNil;
      release_node(dead);
    } else {
      defill(n.left);
    }
  }

  uint32_t min_root_slot() const {
    uint32_t best = kNil;
    for (uint32_t r = 0; r < roots_.size(); ++r) {
      if (roots_[r] == kNil) continue;
      if (best == kNil || less_(nodes_[roots_[r]].ckey, nodes_[roots_[best]].ckey)) best = r;
    }
    return best;
  }

  template <class Fn>
  void walk(uint32_t x, Fn&& fn) const {
    const Node& n = nodes_[x];
    for (uint32_t it = n.head; it != kNil; it = items_[it].next)
      fn(items_[it].payload, items_[it].okey, less_(items_[it].okey, n.ckey));
    if (n.left != kNil) walk(n.left, fn);
    if (n.right != kNil) walk(n.right, fn);
  }

  Less less_;
  double epsilon_ = 0.0;
  uint32_t threshold_ = 0;
  std::vector<Item> items_;
  std::vector<Node> nodes_;
  std::vector<uint32_t> roots_;
  uint32_t free_item_ = kNil;
  uint32_t free_node_ = kNil;
  uint64_t insertions_ = 0;
  uint64_t size_ = 0;
  uint64_t corrupted_ = 0;
};

}  // namespace ggssm
