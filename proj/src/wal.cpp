#include "chronodb/wal.hpp"
#include "chronodb/coding.hpp"
#include "chronodb/error.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fcntl.h>
#include <fstream>
#include <unistd.h>

namespace chronodb {

namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kSegmentMagic = 0x4c424443; // "CDBL"
constexpr std::uint32_t kMasterMagic = 0x4d424443;  // "CDBM"
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kSegmentHeader = 24;
constexpr std::size_t kFrameHeader = 8;
constexpr std::size_t kFlagsOffset = 38; // offset of the flags byte inside a record body

void pwrite_all(int fd, const char *data, std::size_t len, std::uint64_t off)
{
    while (len > 0) {
        const auto n = ::pwrite(fd, data, len, static_cast<off_t>(off));
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw_errno("log write");
        }
        data += n;
        len -= static_cast<std::size_t>(n);
        off += static_cast<std::uint64_t>(n);
    }
}

void pread_all(int fd, char *data, std::size_t len, std::uint64_t off)
{
    while (len > 0) {
        const auto n = ::pread(fd, data, len, static_cast<off_t>(off));
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw_errno("log read");
        }
        if (n == 0) {
            throw Error(Errc::CorruptRecord, "short log read");
        }
        data += n;
        len -= static_cast<std::size_t>(n);
        off += static_cast<std::uint64_t>(n);
    }
}

std::string make_frame(const std::string &body)
{
    std::string frame(kFrameHeader, '\0');
    auto *p = reinterpret_cast<std::uint8_t *>(frame.data());
    put_u32(p, static_cast<std::uint32_t>(body.size()));
    put_u32(p + 4, crc32(body));
    frame += body;
    return frame;
}

LogRecord decode_frame(std::string_view frame)
{
    const auto *p = reinterpret_cast<const std::uint8_t *>(frame.data());
    const auto len = get_u32(p);
    if (frame.size() != kFrameHeader + len) {
        throw Error(Errc::CorruptRecord, "frame length mismatch");
    }
    const auto body = frame.substr(kFrameHeader);
    if (crc32(body) != get_u32(p + 4)) {
        throw Error(Errc::CorruptRecord, "log record CRC mismatch");
    }
    return decode_record(body);
}

} // namespace

struct Wal::File {
    int fd = -1;
    explicit File(int f) : fd(f) {}
    ~File()
    {
        if (fd >= 0) {
            ::close(fd);
        }
    }
};

std::optional<MasterRecord> read_master(const fs::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return std::nullopt;
    }
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() != 28) {
        throw Error(Errc::CorruptRecord, "master record has wrong size");
    }
    const auto *p = reinterpret_cast<const std::uint8_t *>(buf.data());
    if (get_u32(p) != kMasterMagic || crc32(std::string_view(buf).substr(0, 24)) != get_u32(p + 24)) {
        throw Error(Errc::CorruptRecord, "master record corrupt");
    }
    return MasterRecord{Lsn{get_u64(p + 8)}, Lsn{get_u64(p + 16)}};
}

void write_master(const fs::path &path, const MasterRecord &m, bool sync)
{
    std::string buf(28, '\0');
    auto *p = reinterpret_cast<std::uint8_t *>(buf.data());
    put_u32(p, kMasterMagic);
    put_u32(p + 4, kVersion);
    put_u64(p + 8, m.checkpoint.value);
    put_u64(p + 16, m.horizon.value);
    put_u32(p + 24, crc32(std::string_view(buf).substr(0, 24)));

    const auto tmp = fs::path(path).concat(".tmp");
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) {
        throw_errno("open " + tmp.string());
    }
    struct Closer {
        int fd;
        ~Closer() { ::close(fd); }
    } guard{fd};
    pwrite_all(fd, buf.data(), buf.size(), 0);
    if (sync && ::fsync(fd) != 0) {
        throw_errno("fsync master");
    }
    fs::rename(tmp, path);
}

Wal::Wal(WalOptions opts, const Clock &clock) : opts_(std::move(opts)), clock_(clock)
{
    fs::create_directories(opts_.dir);
    open_existing();
}

Wal::~Wal()
{
    if (!crashed_) {
        try {
            flush_all();
        } catch (...) {
        }
    }
}

fs::path Wal::segment_path(Lsn first) const
{
    char name[32];
    std::snprintf(name, sizeof name, "%020" PRIu64 ".log", first.value);
    return opts_.dir / name;
}

void Wal::open_existing()
{
    std::vector<std::pair<std::uint64_t, fs::path>> files;
    for (const auto &entry : fs::directory_iterator(opts_.dir)) {
        if (entry.path().extension() != ".log") {
            continue;
        }
        files.emplace_back(std::stoull(entry.path().stem().string()), entry.path());
    }
    std::sort(files.begin(), files.end());

    std::vector<LogRecord> open_group;
    struct Cut {
        std::size_t segment;
        std::uint64_t offset;
        Lsn lsn;
    };
    std::optional<Cut> group_start;
    std::optional<Cut> cut;

    for (std::size_t i = 0; i < files.size() && !cut; ++i) {
        const auto &[first, path] = files[i];
        std::ifstream in(path, std::ios::binary);
        std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        const auto *hdr = reinterpret_cast<const std::uint8_t *>(buf.data());
        if (buf.size() < kSegmentHeader || get_u32(hdr) != kSegmentMagic || get_u64(hdr + 8) != first) {
            if (i + 1 == files.size() && buf.size() < kSegmentHeader) {
                // Segment created but header never completed.
                fs::remove(path);
                break;
            }
            throw Error(Errc::CorruptRecord, "bad log segment header in " + path.string());
        }
        if (segments_.empty()) {
            first_lsn_ = Lsn{first};
        } else if (first != last_lsn_.value + 1) {
            throw Error(Errc::CorruptRecord, "gap in log before segment " + path.string());
        }

        Segment seg;
        seg.ordinal = next_ordinal_++;
        seg.first = Lsn{first};
        seg.path = path;
        const int fd = ::open(path.c_str(), O_RDWR);
        if (fd < 0) {
            throw_errno("open " + path.string());
        }
        seg.file = std::make_shared<File>(fd);
        segments_.push_back(seg);
        auto &s = segments_.back();

        std::uint64_t off = kSegmentHeader;
        while (off < buf.size()) {
            const auto remaining = buf.size() - off;
            std::optional<LogRecord> rec;
            std::uint32_t len = 0;
            if (remaining >= kFrameHeader) {
                len = get_u32(hdr + off);
                if (remaining >= kFrameHeader + len) {
                    try {
                        rec = decode_frame(std::string_view(buf).substr(off, kFrameHeader + len));
                    } catch (const Error &) {
                    }
                }
            }
            const Lsn expected = last_lsn_.is_nil() ? s.first : last_lsn_.next();
            if (!rec || rec->lsn != expected) {
                if (i + 1 != files.size()) {
                    throw Error(Errc::CorruptRecord, "corrupt record inside " + path.string());
                }
                cut = Cut{segments_.size() - 1, off, expected}; // torn tail
                break;
            }
            if (!opts_.stop_after.is_nil() && rec->lsn > opts_.stop_after) {
                cut = Cut{segments_.size() - 1, off, rec->lsn};
                break;
            }
            const bool grouped = (rec->flags & kFlagInGroup) != 0;
            if (grouped && !group_start) {
                group_start = Cut{segments_.size() - 1, off, rec->lsn};
            }
            locs_.push_back(Loc{s.ordinal, off, static_cast<std::uint32_t>(kFrameHeader + len)});
            s.last = rec->lsn;
            last_lsn_ = rec->lsn;
            off += kFrameHeader + len;
            if (grouped) {
                open_group.push_back(std::move(*rec));
                if (open_group.back().flags & kFlagGroupEnd) {
                    for (const auto &g : open_group) {
                        index_record(g);
                    }
                    open_group.clear();
                    group_start.reset();
                }
            } else {
                index_record(*rec);
            }
        }
        s.size = s.disk_size = std::min<std::uint64_t>(off, buf.size());
    }

    if (group_start) {
        cut = group_start; // drop the incomplete group
    }
    if (cut) {
        while (segments_.size() > cut->segment + 1) {
            fs::remove(segments_.back().path);
            segments_.pop_back();
        }
        auto &s = segments_.back();
        if (::ftruncate(s.file->fd, static_cast<off_t>(cut->offset)) != 0) {
            throw_errno("truncate log tail");
        }
        s.size = s.disk_size = cut->offset;
        const auto keep = cut->lsn.value - first_lsn_.value;
        locs_.resize(keep);
        last_lsn_ = cut->lsn.prev();
        s.last = last_lsn_ >= s.first ? last_lsn_ : Lsn{};
    }
    // Remove files past the cut (stop_after).
    for (const auto &[first, path] : files) {
        if (Lsn{first} > last_lsn_.next() && fs::exists(path)) {
            bool known = std::any_of(segments_.begin(), segments_.end(),
                                     [&](const Segment &s) { return s.path == path; });
            if (!known) {
                fs::remove(path);
            }
        }
    }
    flushed_lsn_ = stable_lsn_ = last_lsn_;
    if (segments_.empty() && !files.empty()) {
        first_lsn_ = last_lsn_.next();
    }
}

void Wal::index_record(const LogRecord &rec)
{
    max_txn_ = std::max(max_txn_, rec.txn);
    if (const auto *pre = std::get_if<PreformatPage>(&rec.body)) {
        (void)pre;
        images_[rec.page].push_back(rec.lsn);
        ++image_count_;
    } else if (const auto *c = std::get_if<TxnCommit>(&rec.body)) {
        last_wall_ = std::max(last_wall_, c->wall_micros);
    } else if (const auto *b = std::get_if<CheckpointBegin>(&rec.body)) {
        last_wall_ = std::max(last_wall_, b->wall_micros);
        open_checkpoints_[rec.lsn.value] = b->wall_micros;
    } else if (const auto *e = std::get_if<CheckpointEnd>(&rec.body)) {
        if (auto it = open_checkpoints_.find(e->begin.value); it != open_checkpoints_.end()) {
            checkpoints_.push_back(CheckpointInfo{e->begin, rec.lsn, it->second});
            open_checkpoints_.erase(it);
        }
    }
}

void Wal::start_segment(Lsn first)
{
    Segment seg;
    seg.ordinal = next_ordinal_++;
    seg.first = first;
    seg.path = segment_path(first);
    seg.size = kSegmentHeader;
    segments_.push_back(seg);
}

Wal::Segment &Wal::segment_for(std::uint64_t ordinal)
{
    return segments_[ordinal - segments_.front().ordinal];
}

const Wal::Segment *Wal::find_segment(std::uint64_t ordinal) const
{
    if (segments_.empty() || ordinal < segments_.front().ordinal) {
        return nullptr;
    }
    return &segments_[ordinal - segments_.front().ordinal];
}

Lsn Wal::append(LogRecord &rec)
{
    std::unique_lock lock(mu_);
    if (crashed_) {
        throw Error(Errc::EngineClosed, "log is closed");
    }
    const Lsn lsn = last_lsn_.next();
    if (!opts_.crash_at.is_nil() && lsn > opts_.crash_at) {
        lock.unlock();
        crash(opts_.crash_at);
        throw InjectedCrash{};
    }
    rec.lsn = lsn;
    if (group_open_) {
        rec.flags |= kFlagInGroup;
    }
    if (auto *c = std::get_if<TxnCommit>(&rec.body)) {
        c->wall_micros = std::max(clock_.now_micros(), last_wall_);
    } else if (auto *b = std::get_if<CheckpointBegin>(&rec.body)) {
        b->wall_micros = std::max(clock_.now_micros(), last_wall_);
    }
    auto frame = make_frame(encode_record(rec));

    if (opts_.max_log_bytes != 0 && disk_bytes_locked() + frame.size() > opts_.max_log_bytes) {
        throw Error(Errc::LogFull, "log budget of " + std::to_string(opts_.max_log_bytes) + " bytes exhausted");
    }
    if (segments_.empty() ||
        (!group_open_ && !segments_.back().last.is_nil() && segments_.back().size >= opts_.segment_bytes)) {
        start_segment(lsn);
    }
    auto &seg = segments_.back();
    locs_.push_back(Loc{seg.ordinal, seg.size, static_cast<std::uint32_t>(frame.size())});
    seg.size += frame.size();
    seg.last = lsn;
    stats_.bytes_appended += frame.size();
    ++stats_.records_appended;
    pending_.push_back(Pending{lsn, seg.ordinal, std::move(frame)});
    last_lsn_ = lsn;
    if (!group_open_) {
        stable_lsn_ = lsn;
    }
    index_record(rec);
    return lsn;
}

void Wal::begin_group()
{
    std::lock_guard lock(mu_);
    group_open_ = true;
    group_first_ = last_lsn_.next();
}

void Wal::end_group()
{
    std::lock_guard lock(mu_);
    if (!group_open_) {
        return;
    }
    group_open_ = false;
    if (last_lsn_ >= group_first_ && !pending_.empty() && pending_.back().lsn == last_lsn_) {
        auto &frame = pending_.back().frame;
        frame[kFrameHeader + kFlagsOffset] = static_cast<char>(frame[kFrameHeader + kFlagsOffset] | kFlagGroupEnd);
        put_u32(reinterpret_cast<std::uint8_t *>(frame.data()) + 4,
                crc32(std::string_view(frame).substr(kFrameHeader)));
    }
    stable_lsn_ = last_lsn_;
}

bool Wal::in_group() const
{
    std::lock_guard lock(mu_);
    return group_open_;
}

void Wal::write_batch(std::deque<Pending> &batch)
{
    // Called without mu_ held; segment files were opened by the caller.
    std::size_t i = 0;
    while (i < batch.size()) {
        std::size_t j = i;
        std::string run;
        while (j < batch.size() && batch[j].ordinal == batch[i].ordinal) {
            run += batch[j].frame;
            ++j;
        }
        std::shared_ptr<File> file;
        std::uint64_t off = 0;
        {
            std::lock_guard lock(mu_);
            const auto &seg = segment_for(batch[i].ordinal);
            file = seg.file;
            off = locs_[batch[i].lsn.value - first_lsn_.value].offset;
        }
        pwrite_all(file->fd, run.data(), run.size(), off);
        if (opts_.sync && ::fdatasync(file->fd) != 0) {
            throw_errno("log sync");
        }
        {
            std::lock_guard lock(mu_);
            segment_for(batch[i].ordinal).disk_size = off + run.size();
        }
        i = j;
    }
}

void Wal::flush_up_to(Lsn lsn)
{
    std::unique_lock lock(mu_);
    if (crashed_) {
        throw Error(Errc::EngineClosed, "log is closed");
    }
    lsn = std::min(lsn, stable_lsn_);
    while (flushed_lsn_ < lsn) {
        if (flushing_) {
            flushed_cv_.wait(lock);
            continue;
        }
        flushing_ = true;
        while (!pending_.empty() && pending_.front().lsn <= stable_lsn_) {
            inflight_.push_back(std::move(pending_.front()));
            pending_.pop_front();
        }
        const Lsn target = inflight_.empty() ? flushed_lsn_ : inflight_.back().lsn;
        for (const auto &p : inflight_) {
            auto &seg = segment_for(p.ordinal);
            if (!seg.file) {
                const int fd = ::open(seg.path.c_str(), O_RDWR | O_CREAT | O_TRUNC, 0644);
                if (fd < 0) {
                    flushing_ = false;
                    throw_errno("create " + seg.path.string());
                }
                seg.file = std::make_shared<File>(fd);
                std::string hdr(kSegmentHeader, '\0');
                auto *h = reinterpret_cast<std::uint8_t *>(hdr.data());
                put_u32(h, kSegmentMagic);
                put_u32(h + 4, kVersion);
                put_u64(h + 8, seg.first.value);
                pwrite_all(fd, hdr.data(), hdr.size(), 0);
                seg.disk_size = kSegmentHeader;
            }
        }
        lock.unlock();
        try {
            write_batch(inflight_);
        } catch (...) {
            lock.lock();
            flushing_ = false;
            flushed_cv_.notify_all();
            throw;
        }
        lock.lock();
        flushed_lsn_ = target;
        inflight_.clear();
        flushing_ = false;
        ++stats_.physical_flushes;
        flushed_cv_.notify_all();
    }
}

void Wal::flush_all()
{
    flush_up_to(last_lsn());
}

Lsn Wal::first_lsn() const
{
    std::lock_guard lock(mu_);
    return first_lsn_;
}

Lsn Wal::last_lsn() const
{
    std::lock_guard lock(mu_);
    return last_lsn_;
}

Lsn Wal::flushed_lsn() const
{
    std::lock_guard lock(mu_);
    return flushed_lsn_;
}

Lsn Wal::stable_lsn() const
{
    std::lock_guard lock(mu_);
    return stable_lsn_;
}

LogRecord Wal::read(Lsn lsn) const
{
    std::shared_ptr<File> file;
    Loc loc{};
    {
        std::lock_guard lock(mu_);
        if (lsn.is_nil() || lsn < first_lsn_) {
            throw Error(Errc::TruncatedLsn, "LSN " + std::to_string(lsn.value) + " is below the log horizon " +
                                                std::to_string(first_lsn_.value));
        }
        if (lsn > last_lsn_) {
            throw Error(Errc::InvalidArgument, "LSN " + std::to_string(lsn.value) + " beyond end of log");
        }
        ++records_read_;
        if (lsn > flushed_lsn_) {
            for (const auto *q : {&inflight_, &pending_}) {
                if (!q->empty() && lsn >= q->front().lsn && lsn <= q->back().lsn) {
                    return decode_frame((*q)[lsn.value - q->front().lsn.value].frame);
                }
            }
            throw Error(Errc::CorruptRecord, "buffered record missing");
        }
        loc = locs_[lsn.value - first_lsn_.value];
        const auto *seg = find_segment(loc.ordinal);
        if (seg == nullptr || !seg->file) {
            throw Error(Errc::TruncatedLsn, "segment for LSN " + std::to_string(lsn.value) + " is gone");
        }
        file = seg->file;
    }
    std::string frame(loc.length, '\0');
    pread_all(file->fd, frame.data(), frame.size(), loc.offset);
    auto rec = decode_frame(frame);
    if (rec.lsn != lsn) {
        throw Error(Errc::CorruptRecord, "record at LSN " + std::to_string(lsn.value) + " has wrong LSN");
    }
    return rec;
}

void Wal::scan(Lsn from, Lsn to, const std::function<bool(const LogRecord &)> &fn) const
{
    for (Lsn l = from; l <= to; l = l.next()) {
        if (!fn(read(l))) {
            return;
        }
    }
}

std::optional<Lsn> Wal::first_image_after(PageNo page, Lsn lo, Lsn hi) const
{
    std::lock_guard lock(mu_);
    const auto it = images_.find(page);
    if (it == images_.end()) {
        return std::nullopt;
    }
    const auto pos = std::upper_bound(it->second.begin(), it->second.end(), lo);
    if (pos == it->second.end() || *pos > hi) {
        return std::nullopt;
    }
    return *pos;
}

std::size_t Wal::image_count() const
{
    std::lock_guard lock(mu_);
    return image_count_;
}

std::vector<CheckpointInfo> Wal::checkpoints() const
{
    std::lock_guard lock(mu_);
    return checkpoints_;
}

std::int64_t Wal::last_wall_micros() const
{
    std::lock_guard lock(mu_);
    return last_wall_;
}

TxnId Wal::max_txn_seen() const
{
    std::lock_guard lock(mu_);
    return max_txn_;
}

Lsn Wal::truncate_before(Lsn horizon)
{
    std::lock_guard lock(mu_);
    while (segments_.size() > 1) {
        auto &front = segments_.front();
        if (front.last.is_nil() || front.last >= horizon || front.last > flushed_lsn_) {
            break;
        }
        const auto count = front.last.value - front.first.value + 1;
        fs::remove(front.path);
        locs_.erase(locs_.begin(), locs_.begin() + static_cast<std::ptrdiff_t>(count));
        segments_.pop_front();
        first_lsn_ = segments_.front().first;
    }
    std::erase_if(checkpoints_, [&](const CheckpointInfo &c) { return c.begin < first_lsn_; });
    return first_lsn_;
}

void Wal::crash(Lsn keep_through)
{
    std::unique_lock lock(mu_);
    flushed_cv_.wait(lock, [&] { return !flushing_; });
    if (crashed_) {
        return;
    }
    std::deque<Pending> keep;
    for (auto &p : pending_) {
        if (p.lsn <= keep_through) {
            keep.push_back(std::move(p));
        }
    }
    pending_.clear();
    for (const auto &p : keep) {
        auto &seg = segment_for(p.ordinal);
        if (!seg.file) {
            const int fd = ::open(seg.path.c_str(), O_RDWR | O_CREAT | O_TRUNC, 0644);
            if (fd < 0) {
                throw_errno("create " + seg.path.string());
            }
            seg.file = std::make_shared<File>(fd);
            std::string hdr(kSegmentHeader, '\0');
            auto *h = reinterpret_cast<std::uint8_t *>(hdr.data());
            put_u32(h, kSegmentMagic);
            put_u32(h + 4, kVersion);
            put_u64(h + 8, seg.first.value);
            pwrite_all(fd, hdr.data(), hdr.size(), 0);
        }
        const auto off = locs_[p.lsn.value - first_lsn_.value].offset;
        pwrite_all(seg.file->fd, p.frame.data(), p.frame.size(), off);
    }
    if (!keep.empty()) {
        flushed_lsn_ = keep.back().lsn;
    }
    durable_stable_ = flushed_lsn_;
    if (group_open_ && durable_stable_ >= group_first_) {
        durable_stable_ = group_first_.prev();
    }
    crashed_ = true;
}

Lsn Wal::durable_stable_lsn() const
{
    std::lock_guard lock(mu_);
    return durable_stable_;
}

std::uint64_t Wal::disk_bytes_locked() const
{
    std::uint64_t total = 0;
    for (const auto &s : segments_) {
        total += s.size;
    }
    return total;
}

std::uint64_t Wal::disk_bytes() const
{
    std::lock_guard lock(mu_);
    return disk_bytes_locked();
}

std::size_t Wal::segment_count() const
{
    std::lock_guard lock(mu_);
    return segments_.size();
}

WalStats Wal::stats() const
{
    std::lock_guard lock(mu_);
    auto s = stats_;
    s.records_read = records_read_;
    return s;
}

} // namespace chronodb
