#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "sns/hilbert.hpp"
#include "sns/interval.hpp"
#include "sns/interval_tree.hpp"
#include "sns/net_address.hpp"

namespace sns {

class SnapshotError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A device's registered spatial extent bound to its network endpoint.
struct AddressArea {
    DeviceId device_id{};
    NetworkAddress address;
    IntervalSet intervals; // non-empty, sorted, disjoint
    std::uint64_t version = 0;
    std::int64_t updated_at_ms = 0;
};

// Spatial registry for one cell: devices register areas, queries resolve
// locations to every overlapping device. Reads run concurrently; writes are
// serialized and appear atomically, so no query ever observes a half-moved
// device.
class Registry {
public:
    Registry(GridConfig grid, CellId cell_id, std::uint32_t max_results = 32);

    struct UpdateOutcome {
        enum class Status { applied, stale };
        Status status = Status::applied;
        std::uint64_t current_version = 0; // stored version, for resync on stale
    };

    // Replaces the device's area atomically. The first registration accepts
    // any version (survey files use 0); later updates must carry a strictly
    // greater version or they are rejected as stale. Throws
    // std::invalid_argument when the geometry is degenerate or covers no
    // grid cell.
    UpdateOutcome register_or_update(const DeviceId& device_id, const NetworkAddress& address,
                                     const QueryGeometry& geometry, std::uint64_t version);

    // Removes the device and all its intervals. Returns false when unknown.
    bool deregister(const DeviceId& device_id);

    struct ResolveResult {
        DeviceId device_id{};
        NetworkAddress address;
        IntervalSet matched;
    };

    struct ResolveOutcome {
        bool too_many = false;
        std::uint32_t total_found = 0; // distinct devices overlapping the query
        std::vector<ResolveResult> results; // ordered by device id; empty when too_many
    };

    // All devices whose address area overlaps the query area. When more than
    // max_results distinct devices match, returns too_many with the count and
    // no results so the client can narrow the query. max_results 0 selects
    // the registry default.
    ResolveOutcome resolve(const QueryGeometry& query, std::uint32_t max_results = 0) const;

    // Binary snapshot with a file-level checksum; written atomically via a
    // temp file. restore() replaces the whole state and requires the file's
    // grid and cell to match this registry. Both throw SnapshotError.
    void snapshot(const std::string& path) const;
    void restore(const std::string& path);

    std::size_t device_count() const;
    std::size_t interval_count() const;
    const GridConfig& grid() const { return grid_; }
    CellId cell_id() const { return cell_id_; }
    std::uint32_t default_max_results() const { return max_results_; }

    // Current area of one device, if registered.
    std::optional<AddressArea> lookup(const DeviceId& device_id) const;

private:
    using Handle = IntervalTree::AddressId;

    struct Entry {
        AddressArea area;
        Handle handle = 0;
    };

    void insert_locked(const DeviceId& id, Entry entry);

    GridConfig grid_;
    CellId cell_id_;
    std::uint32_t max_results_;

    mutable std::shared_mutex mu_;
    IntervalTree tree_;
    std::map<DeviceId, Entry> devices_;
    std::map<Handle, DeviceId> by_handle_;
    Handle next_handle_ = 1;
};

} // namespace sns
