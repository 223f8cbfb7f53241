#include "sns/registry.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>

namespace sns {

namespace {

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

// CRC-32 (IEEE 802.3), reflected, table-driven.
std::uint32_t crc32(const std::uint8_t* data, std::size_t len) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = 0xffffffffu;
    for (std::size_t i = 0; i < len; ++i)
        c = table[(c ^ data[i]) & 0xff] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

constexpr char kMagic[8] = {'S', 'N', 'S', 'S', 'N', 'A', 'P', '1'};

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) {
        u8(static_cast<std::uint8_t>(v >> 8));
        u8(static_cast<std::uint8_t>(v));
    }
    void u32(std::uint32_t v) {
        u16(static_cast<std::uint16_t>(v >> 16));
        u16(static_cast<std::uint16_t>(v));
    }
    void u64(std::uint64_t v) {
        u32(static_cast<std::uint32_t>(v >> 32));
        u32(static_cast<std::uint32_t>(v));
    }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void bytes(const std::uint8_t* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }

    std::vector<std::uint8_t>& out() { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    Reader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}

    std::uint8_t u8() {
        need(1);
        return p_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        const std::uint16_t v = static_cast<std::uint16_t>((p_[pos_] << 8) | p_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        const std::uint32_t hi = u16();
        return (hi << 16) | u16();
    }
    std::uint64_t u64() {
        const std::uint64_t hi = u32();
        return (hi << 32) | u32();
    }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    void bytes(std::uint8_t* dst, std::size_t n) {
        need(n);
        std::memcpy(dst, p_ + pos_, n);
        pos_ += n;
    }
    std::size_t remaining() const { return n_ - pos_; }
    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (n_ - pos_ < n)
            throw SnapshotError("snapshot truncated");
    }
    const std::uint8_t* p_;
    std::size_t n_;
    std::size_t pos_ = 0;
};

void write_address(Writer& w, const NetworkAddress& a) {
    w.u8(static_cast<std::uint8_t>(a.family));
    w.bytes(a.bytes.data(), a.addr_len());
    w.u16(a.port);
    w.u8(static_cast<std::uint8_t>(a.label.size()));
    w.bytes(reinterpret_cast<const std::uint8_t*>(a.label.data()), a.label.size());
}

NetworkAddress read_address(Reader& r) {
    NetworkAddress a;
    const std::uint8_t family = r.u8();
    if (family != 4 && family != 6)
        throw SnapshotError("snapshot has invalid address family");
    a.family = static_cast<NetworkAddress::Family>(family);
    r.bytes(a.bytes.data(), a.addr_len());
    a.port = r.u16();
    const std::uint8_t label_len = r.u8();
    if (label_len > 63)
        throw SnapshotError("snapshot has oversized label");
    a.label.resize(label_len);
    r.bytes(reinterpret_cast<std::uint8_t*>(a.label.data()), label_len);
    a.validate();
    return a;
}

} // namespace

Registry::Registry(GridConfig grid, CellId cell_id, std::uint32_t max_results)
    : grid_(grid), cell_id_(cell_id), max_results_(max_results) {
    grid_.validate();
    if (max_results_ < 1)
        throw std::invalid_argument("max_results must be at least 1");
}

Registry::UpdateOutcome Registry::register_or_update(const DeviceId& device_id,
                                                     const NetworkAddress& address,
                                                     const QueryGeometry& geometry,
                                                     std::uint64_t version) {
    address.validate();
    IntervalSet intervals = geometry_to_intervals(grid_, geometry);
    if (intervals.empty())
        throw std::invalid_argument("address area covers no grid cell");

    std::unique_lock lock(mu_);
    auto it = devices_.find(device_id);
    if (it != devices_.end()) {
        Entry& entry = it->second;
        if (version <= entry.area.version)
            return {UpdateOutcome::Status::stale, entry.area.version};
        for (const Interval& iv : entry.area.intervals)
            tree_.erase(iv, entry.handle);
        entry.area.address = address;
        entry.area.intervals = std::move(intervals);
        entry.area.version = version;
        entry.area.updated_at_ms = now_ms();
        for (const Interval& iv : entry.area.intervals)
            tree_.insert(iv, entry.handle);
        return {UpdateOutcome::Status::applied, version};
    }

    Entry entry;
    entry.area = AddressArea{device_id, address, std::move(intervals), version, now_ms()};
    entry.handle = next_handle_++;
    insert_locked(device_id, std::move(entry));
    return {UpdateOutcome::Status::applied, version};
}

void Registry::insert_locked(const DeviceId& id, Entry entry) {
    for (const Interval& iv : entry.area.intervals)
        tree_.insert(iv, entry.handle);
    by_handle_[entry.handle] = id;
    devices_.emplace(id, std::move(entry));
}

bool Registry::deregister(const DeviceId& device_id) {
    std::unique_lock lock(mu_);
    auto it = devices_.find(device_id);
    if (it == devices_.end())
        return false;
    for (const Interval& iv : it->second.area.intervals)
        tree_.erase(iv, it->second.handle);
    by_handle_.erase(it->second.handle);
    devices_.erase(it);
    return true;
}

Registry::ResolveOutcome Registry::resolve(const QueryGeometry& query,
                                           std::uint32_t max_results) const {
    const IntervalSet wanted = geometry_to_intervals(grid_, query);
    const std::uint32_t limit = max_results == 0 ? max_results_ : max_results;

    ResolveOutcome out;
    if (wanted.empty())
        return out;

    std::shared_lock lock(mu_);
    std::vector<IntervalTree::Match> matches = tree_.query_all(wanted);
    out.total_found = static_cast<std::uint32_t>(matches.size());
    if (matches.size() > limit) {
        out.too_many = true;
        return out;
    }
    out.results.reserve(matches.size());
    for (auto& m : matches) {
        const DeviceId& id = by_handle_.at(m.address_id);
        const Entry& entry = devices_.at(id);
        out.results.push_back({id, entry.area.address, std::move(m.matched)});
    }
    // handles are assigned in registration order; report by device id instead
    std::sort(out.results.begin(), out.results.end(),
              [](const ResolveResult& a, const ResolveResult& b) {
                  return a.device_id < b.device_id;
              });
    return out;
}

std::size_t Registry::device_count() const {
    std::shared_lock lock(mu_);
    return devices_.size();
}

std::size_t Registry::interval_count() const {
    std::shared_lock lock(mu_);
    return tree_.size();
}

std::optional<AddressArea> Registry::lookup(const DeviceId& device_id) const {
    std::shared_lock lock(mu_);
    auto it = devices_.find(device_id);
    if (it == devices_.end())
        return std::nullopt;
    return it->second.area;
}

void Registry::snapshot(const std::string& path) const {
    Writer w;
    w.bytes(reinterpret_cast<const std::uint8_t*>(kMagic), sizeof kMagic);
    {
        std::shared_lock lock(mu_);
        w.u64(cell_id_);
        w.u8(static_cast<std::uint8_t>(grid_.order));
        w.i64(grid_.cell_size_cm);
        w.i64(grid_.origin_x_cm);
        w.i64(grid_.origin_y_cm);
        w.u32(static_cast<std::uint32_t>(devices_.size()));
        for (const auto& [id, entry] : devices_) {
            Writer rec;
            rec.bytes(id.data(), id.size());
            rec.u64(entry.area.version);
            rec.i64(entry.area.updated_at_ms);
            write_address(rec, entry.area.address);
            rec.u32(static_cast<std::uint32_t>(entry.area.intervals.size()));
            for (const Interval& iv : entry.area.intervals) {
                rec.u32(iv.low);
                rec.u32(iv.high);
            }
            w.u32(static_cast<std::uint32_t>(rec.out().size()));
            w.bytes(rec.out().data(), rec.out().size());
        }
    }
    w.u32(crc32(w.out().data(), w.out().size()));

    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f)
            throw SnapshotError("cannot open snapshot file " + tmp);
        f.write(reinterpret_cast<const char*>(w.out().data()),
                static_cast<std::streamsize>(w.out().size()));
        if (!f)
            throw SnapshotError("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw SnapshotError("cannot rename snapshot into place: " + path);
}

void Registry::restore(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw SnapshotError("cannot open snapshot file " + path);
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());

    if (data.size() < sizeof kMagic + 4)
        throw SnapshotError("snapshot too short");
    const std::uint32_t stored_crc =
        (std::uint32_t{data[data.size() - 4]} << 24) | (std::uint32_t{data[data.size() - 3]} << 16) |
        (std::uint32_t{data[data.size() - 2]} << 8) | std::uint32_t{data[data.size() - 1]};
    if (crc32(data.data(), data.size() - 4) != stored_crc)
        throw SnapshotError("snapshot checksum mismatch");
    if (std::memcmp(data.data(), kMagic, sizeof kMagic) != 0)
        throw SnapshotError("snapshot magic mismatch");

    Reader r(data.data() + sizeof kMagic, data.size() - sizeof kMagic - 4);
    const CellId cell = r.u64();
    GridConfig grid = grid_;
    grid.order = r.u8();
    grid.cell_size_cm = r.i64();
    grid.origin_x_cm = r.i64();
    grid.origin_y_cm = r.i64();
    if (cell != cell_id_ || grid != grid_)
        throw SnapshotError("snapshot was taken for a different cell or grid");

    const std::uint32_t count = r.u32();
    IntervalTree tree;
    std::map<DeviceId, Entry> devices;
    std::map<Handle, DeviceId> by_handle;
    Handle next_handle = 1;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t len = r.u32();
        const std::size_t start = r.pos();
        DeviceId id{};
        r.bytes(id.data(), id.size());
        Entry entry;
        entry.area.device_id = id;
        entry.area.version = r.u64();
        entry.area.updated_at_ms = r.i64();
        entry.area.address = read_address(r);
        const std::uint32_t n_iv = r.u32();
        std::vector<Interval> ivs;
        ivs.reserve(n_iv);
        for (std::uint32_t k = 0; k < n_iv; ++k) {
            const std::uint32_t low = r.u32();
            const std::uint32_t high = r.u32();
            if (low > high || std::uint64_t{high} >= grid_.cell_count())
                throw SnapshotError("snapshot interval outside the grid");
            ivs.push_back({low, high});
        }
        if (r.pos() - start != len)
            throw SnapshotError("snapshot record length mismatch");
        entry.area.intervals = IntervalSet::normalized(std::move(ivs));
        if (entry.area.intervals.empty())
            throw SnapshotError("snapshot record has no intervals");
        entry.handle = next_handle++;
        for (const Interval& iv : entry.area.intervals)
            tree.insert(iv, entry.handle);
        by_handle[entry.handle] = id;
        if (!devices.emplace(id, std::move(entry)).second)
            throw SnapshotError("snapshot has duplicate device id");
    }
    if (r.remaining() != 0)
        throw SnapshotError("snapshot has trailing bytes");

    std::unique_lock lock(mu_);
    tree_ = std::move(tree);
    devices_ = std::move(devices);
    by_handle_ = std::move(by_handle);
    next_handle_ = next_handle;
}

} // namespace sns
