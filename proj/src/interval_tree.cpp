#include "sns/interval_tree.hpp"

#include <algorithm>
#include <utility>

namespace sns {

struct IntervalTree::Node {
    Interval iv;
    AddressId addr;
    HilbertIndex max;
    Node* left;
    Node* right;
    Node* parent;
    bool red;
};

namespace {

// Total order: (low, high, address_id).
int compare(const Interval& a, IntervalTree::AddressId aa, const Interval& b,
            IntervalTree::AddressId ab) {
    if (a.low != b.low)
        return a.low < b.low ? -1 : 1;
    if (a.high != b.high)
        return a.high < b.high ? -1 : 1;
    if (aa != ab)
        return aa < ab ? -1 : 1;
    return 0;
}

} // namespace

IntervalTree::IntervalTree() {
    nil_ = new Node{{0, 0}, 0, 0, nullptr, nullptr, nullptr, false};
    nil_->left = nil_->right = nil_->parent = nil_;
    root_ = nil_;
}

IntervalTree::~IntervalTree() {
    if (nil_ == nullptr)
        return;
    destroy(root_);
    delete nil_;
}

IntervalTree::IntervalTree(IntervalTree&& other) noexcept
    : nil_(std::exchange(other.nil_, nullptr)),
      root_(std::exchange(other.root_, nullptr)),
      size_(std::exchange(other.size_, 0)) {}

IntervalTree& IntervalTree::operator=(IntervalTree&& other) noexcept {
    if (this != &other) {
        std::swap(nil_, other.nil_);
        std::swap(root_, other.root_);
        std::swap(size_, other.size_);
    }
    return *this;
}

void IntervalTree::destroy(Node* n) {
    if (n == nil_)
        return;
    destroy(n->left);
    destroy(n->right);
    delete n;
}

void IntervalTree::update_max(Node* n) {
    n->max = std::max({n->iv.high, n->left->max, n->right->max});
}

void IntervalTree::rotate_left(Node* x) {
    Node* y = x->right;
    x->right = y->left;
    if (y->left != nil_)
        y->left->parent = x;
    y->parent = x->parent;
    if (x->parent == nil_)
        root_ = y;
    else if (x == x->parent->left)
        x->parent->left = y;
    else
        x->parent->right = y;
    y->left = x;
    x->parent = y;
    // y now heads x's old subtree; only x's coverage shrank
    y->max = x->max;
    update_max(x);
}

void IntervalTree::rotate_right(Node* x) {
    Node* y = x->left;
    x->left = y->right;
    if (y->right != nil_)
        y->right->parent = x;
    y->parent = x->parent;
    if (x->parent == nil_)
        root_ = y;
    else if (x == x->parent->right)
        x->parent->right = y;
    else
        x->parent->left = y;
    y->right = x;
    x->parent = y;
    y->max = x->max;
    update_max(x);
}

IntervalTree::Node* IntervalTree::find(Interval iv, AddressId address_id) const {
    Node* n = root_;
    while (n != nil_) {
        const int c = compare(iv, address_id, n->iv, n->addr);
        if (c == 0)
            return n;
        n = c < 0 ? n->left : n->right;
    }
    return nullptr;
}

bool IntervalTree::insert(Interval iv, AddressId address_id) {
    Node* parent = nil_;
    Node* cur = root_;
    int c = 0;
    while (cur != nil_) {
        parent = cur;
        c = compare(iv, address_id, cur->iv, cur->addr);
        if (c == 0)
            return false; // exact duplicate, idempotent
        cur = c < 0 ? cur->left : cur->right;
    }
    Node* z = new Node{iv, address_id, iv.high, nil_, nil_, parent, true};
    if (parent == nil_)
        root_ = z;
    else if (c < 0)
        parent->left = z;
    else
        parent->right = z;
    for (Node* p = parent; p != nil_; p = p->parent)
        update_max(p);
    insert_fixup(z);
    ++size_;
    return true;
}

void IntervalTree::insert_fixup(Node* z) {
    while (z->parent->red) {
        Node* gp = z->parent->parent;
        if (z->parent == gp->left) {
            Node* uncle = gp->right;
            if (uncle->red) {
                z->parent->red = false;
                uncle->red = false;
                gp->red = true;
                z = gp;
            } else {
                if (z == z->parent->right) {
                    z = z->parent;
                    rotate_left(z);
                }
                z->parent->red = false;
                gp->red = true;
                rotate_right(gp);
            }
        } else {
            Node* uncle = gp->left;
            if (uncle->red) {
                z->parent->red = false;
                uncle->red = false;
                gp->red = true;
                z = gp;
            } else {
                if (z == z->parent->left) {
                    z = z->parent;
                    rotate_right(z);
                }
                z->parent->red = false;
                gp->red = true;
                rotate_left(gp);
            }
        }
    }
    root_->red = false;
}

void IntervalTree::transplant(Node* u, Node* v) {
    if (u->parent == nil_)
        root_ = v;
    else if (u == u->parent->left)
        u->parent->left = v;
    else
        u->parent->right = v;
    v->parent = u->parent; // also set for the sentinel; erase_fixup relies on it
}

IntervalTree::Node* IntervalTree::minimum(Node* n) const {
    while (n->left != nil_)
        n = n->left;
    return n;
}

bool IntervalTree::erase(Interval iv, AddressId address_id) {
    Node* z = find(iv, address_id);
    if (z == nullptr)
        return false;

    Node* y = z;
    bool y_was_red = y->red;
    Node* x;
    if (z->left == nil_) {
        x = z->right;
        transplant(z, z->right);
    } else if (z->right == nil_) {
        x = z->left;
        transplant(z, z->left);
    } else {
        y = minimum(z->right);
        y_was_red = y->red;
        x = y->right;
        if (y->parent == z) {
            x->parent = y;
        } else {
            transplant(y, y->right);
            y->right = z->right;
            y->right->parent = y;
        }
        transplant(z, y);
        y->left = z->left;
        y->left->parent = y;
        y->red = z->red;
    }
    for (Node* p = x->parent; p != nil_; p = p->parent)
        update_max(p);
    if (!y_was_red)
        erase_fixup(x);
    delete z;
    --size_;
    return true;
}

void IntervalTree::erase_fixup(Node* x) {
    while (x != root_ && !x->red) {
        if (x == x->parent->left) {
            Node* w = x->parent->right;
            if (w->red) {
                w->red = false;
                x->parent->red = true;
                rotate_left(x->parent);
                w = x->parent->right;
            }
            if (!w->left->red && !w->right->red) {
                w->red = true;
                x = x->parent;
            } else {
                if (!w->right->red) {
                    w->left->red = false;
                    w->red = true;
                    rotate_right(w);
                    w = x->parent->right;
                }
                w->red = x->parent->red;
                x->parent->red = false;
                w->right->red = false;
                rotate_left(x->parent);
                x = root_;
            }
        } else {
            Node* w = x->parent->left;
            if (w->red) {
                w->red = false;
                x->parent->red = true;
                rotate_right(x->parent);
                w = x->parent->left;
            }
            if (!w->right->red && !w->left->red) {
                w->red = true;
                x = x->parent;
            } else {
                if (!w->left->red) {
                    w->right->red = false;
                    w->red = true;
                    rotate_left(w);
                    w = x->parent->left;
                }
                w->red = x->parent->red;
                x->parent->red = false;
                w->left->red = false;
                rotate_right(x->parent);
                x = root_;
            }
        }
    }
    x->red = false;
}

void IntervalTree::search(const Node* n, const Interval& q,
                          std::vector<std::pair<AddressId, Interval>>& out) const {
    if (n == nil_ || n->max < q.low)
        return;
    search(n->left, q, out);
    if (overlaps(n->iv, q))
        out.emplace_back(n->addr,
                         Interval{std::max(n->iv.low, q.low), std::min(n->iv.high, q.high)});
    // every low in the right subtree is >= this node's low
    if (n->iv.low <= q.high)
        search(n->right, q, out);
}

std::vector<IntervalTree::Match> IntervalTree::query_all(const IntervalSet& query) const {
    std::vector<std::pair<AddressId, Interval>> hits;
    for (const Interval& q : query)
        search(root_, q, hits);

    std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first)
            return a.first < b.first;
        return a.second.low != b.second.low ? a.second.low < b.second.low
                                            : a.second.high < b.second.high;
    });

    std::vector<Match> matches;
    std::size_t i = 0;
    while (i < hits.size()) {
        std::size_t j = i;
        std::vector<Interval> clipped;
        while (j < hits.size() && hits[j].first == hits[i].first)
            clipped.push_back(hits[j++].second);
        matches.push_back({hits[i].first, IntervalSet::normalized(std::move(clipped))});
        i = j;
    }
    return matches;
}

int IntervalTree::height() const {
    struct Walker {
        const Node* nil;
        int depth(const Node* n) const {
            if (n == nil)
                return 0;
            return 1 + std::max(depth(n->left), depth(n->right));
        }
    };
    return Walker{nil_}.depth(root_);
}

bool IntervalTree::check_invariants() const {
    if (nil_->red || root_->red)
        return false;
    struct Checker {
        const Node* nil;
        bool ok = true;
        std::size_t count = 0;
        const Node* prev = nullptr;

        // returns the black height of the subtree
        int walk(const Node* n) {
            if (n == nil)
                return 1;
            ++count;
            if (n->iv.low > n->iv.high)
                ok = false;
            if (n->red && (n->left->red || n->right->red))
                ok = false; // red node with red child
            const HilbertIndex expect =
                std::max({n->iv.high, n->left->max, n->right->max});
            if (n->max != expect)
                ok = false;
            const int lh = walk(n->left);
            // in-order keys must ascend strictly in the composite order
            if (prev != nullptr && compare(prev->iv, prev->addr, n->iv, n->addr) >= 0)
                ok = false;
            prev = n;
            const int rh = walk(n->right);
            if (lh != rh)
                ok = false;
            return lh + (n->red ? 0 : 1);
        }
    };
    Checker checker{nil_};
    checker.walk(root_);
    return checker.ok && checker.count == size_;
}

} // namespace sns
