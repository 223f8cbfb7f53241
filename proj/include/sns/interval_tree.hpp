#pragma once

#include <cstdint>
#include <vector>

#include "sns/interval.hpp"

namespace sns {

// Self-balancing augmented interval tree. Nodes are ordered by interval low
// endpoint (ties broken by high endpoint, then address id, to keep a total
// order) and each node carries the maximum high endpoint in its subtree,
// which prunes overlap searches. Searches return EVERY overlapping entry,
// descending both children whenever the bounds permit, so overlapping
// address areas from different devices all surface.
//
// Not internally synchronized; callers serialize writes.
class IntervalTree {
public:
    using AddressId = std::uint64_t;

    struct Match {
        AddressId address_id = 0;
        IntervalSet matched; // stored intervals clipped to the query
    };

    IntervalTree();
    ~IntervalTree();
    IntervalTree(IntervalTree&& other) noexcept;
    IntervalTree& operator=(IntervalTree&& other) noexcept;
    IntervalTree(const IntervalTree&) = delete;
    IntervalTree& operator=(const IntervalTree&) = delete;

    // Returns false (and changes nothing) when the exact (interval, address)
    // pair is already present, so re-insertion is idempotent.
    bool insert(Interval iv, AddressId address_id);

    // Removes the exact (interval, address) pair. Returns false when absent.
    bool erase(Interval iv, AddressId address_id);

    // All stored entries overlapping any interval of the query, grouped by
    // address id in ascending order, with matched ranges clipped to the
    // pairwise overlaps.
    std::vector<Match> query_all(const IntervalSet& query) const;

    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }

    // Nodes on the longest root-to-leaf path; 0 when empty.
    int height() const;

    // Validates BST order, red-black shape, and stored subtree maxima.
    bool check_invariants() const;

private:
    struct Node;

    void rotate_left(Node* x);
    void rotate_right(Node* x);
    void insert_fixup(Node* z);
    void erase_fixup(Node* x);
    void transplant(Node* u, Node* v);
    void update_max(Node* n);
    Node* find(Interval iv, AddressId address_id) const;
    Node* minimum(Node* n) const;
    void search(const Node* n, const Interval& q,
                std::vector<std::pair<AddressId, Interval>>& out) const;
    void destroy(Node* n);

    Node* nil_ = nullptr;
    Node* root_ = nullptr;
    std::size_t size_ = 0;
};

} // namespace sns
