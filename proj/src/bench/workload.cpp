#include "chronodb/bench/workload.hpp"
#include "chronodb/error.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <optional>
#include <random>
#include <set>

namespace chronodb::bench {

std::string make_key(std::uint64_t k)
{
    char buf[24];
    std::snprintf(buf, sizeof buf, "k%08llu", static_cast<unsigned long long>(k));
    return buf;
}

namespace {

using Rows = std::map<std::string, std::string>;

struct OpenTxn {
    Txn txn;
    std::size_t target = 0;
    std::vector<TraceOp> ops;
    std::map<std::string, std::map<std::string, std::optional<std::string>>> writes;
    std::set<std::string> created;
    std::set<std::string> dropped;
};

class Generator
{
public:
    Generator(Database &db, const WorkloadSpec &spec, ManualClock *clock)
        : db_(db), spec_(spec), clock_(clock), rng_(spec.seed)
    {
    }

    WorkloadResult run()
    {
        const auto t0 = std::chrono::steady_clock::now();
        for (const auto &info : db_.tables()) {
            for (const auto &row : db_.scan(info.name)) {
                committed_[info.name][row.key] = row.value;
            }
            committed_.try_emplace(info.name);
            if (info.name.size() > 1 && info.name[0] == 't') {
                try {
                    next_table_ = std::max<std::uint64_t>(next_table_, std::stoull(info.name.substr(1)) + 1);
                } catch (const std::exception &) {
                }
            }
        }
        while (result_.counters.ops < spec_.op_count) {
            if (open_.size() < std::max<std::size_t>(1, spec_.concurrency)) {
                start_txn();
            }
            const std::size_t slot = pick(open_.size());
            step(slot);
            if (open_[slot].ops.size() >= open_[slot].target) {
                finish(slot, below(spec_.abort_probability));
            }
            if (spec_.checkpoint_every != 0 && result_.counters.ops % spec_.checkpoint_every == 0) {
                db_.checkpoint();
            }
        }
        while (!open_.empty()) {
            if (spec_.leave_in_flight && !open_.back().ops.empty()) {
                result_.in_flight.push_back(open_.back().txn);
                drop_claims(open_.size() - 1);
                open_.pop_back();
            } else {
                finish(open_.size() - 1, open_.back().ops.empty());
            }
        }
        result_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return std::move(result_);
    }

private:
    std::uint64_t next() { return rng_(); }
    std::size_t pick(std::size_t n) { return static_cast<std::size_t>(next() % n); }
    bool below(double p) { return static_cast<double>(next() >> 11) * 0x1.0p-53 < p; }

    std::string value()
    {
        const auto len = spec_.min_value + pick(spec_.max_value - spec_.min_value + 1);
        std::string v(len, ' ');
        for (auto &c : v) {
            c = static_cast<char>('a' + pick(26));
        }
        return v;
    }

    void tick()
    {
        if (clock_ != nullptr) {
            clock_->advance(spec_.clock_step_micros);
        }
    }

    void start_txn()
    {
        OpenTxn t;
        t.txn = db_.begin();
        t.target = spec_.min_txn_ops + pick(spec_.max_txn_ops - spec_.min_txn_ops + 1);
        open_.push_back(std::move(t));
    }

    // Tables slot `s` may touch: not created, dropped or in use elsewhere in
    // a conflicting way.
    std::vector<std::string> visible_tables(std::size_t s, bool for_drop) const
    {
        std::vector<std::string> out;
        auto usable = [&](const std::string &name) {
            if (auto it = owner_.find(name); it != owner_.end() && it->second != s) {
                return false;
            }
            if (for_drop) {
                if (auto it = users_.find(name); it != users_.end()) {
                    for (auto u : it->second) {
                        if (u != s) {
                            return false;
                        }
                    }
                }
            }
            return true;
        };
        const auto &t = open_[s];
        for (const auto &[name, rows] : committed_) {
            if (!t.dropped.count(name) && usable(name)) {
                out.push_back(name);
            }
        }
        for (const auto &name : t.created) {
            if (!t.dropped.count(name)) {
                out.push_back(name);
            }
        }
        return out;
    }

    std::optional<std::string> current(std::size_t s, const std::string &table, const std::string &key) const
    {
        const auto &t = open_[s];
        if (auto w = t.writes.find(table); w != t.writes.end()) {
            if (auto k = w->second.find(key); k != w->second.end()) {
                return k->second;
            }
        }
        if (t.created.count(table)) {
            return std::nullopt;
        }
        auto c = committed_.find(table);
        if (c == committed_.end()) {
            return std::nullopt;
        }
        auto k = c->second.find(key);
        return k == c->second.end() ? std::nullopt : std::optional<std::string>(k->second);
    }

    bool locked_elsewhere(std::size_t s, const std::string &table, const std::string &key) const
    {
        auto it = key_owner_.find({table, key});
        return it != key_owner_.end() && it->second != s;
    }

    // Some existing key of `table` as seen by slot `s`, near a random probe.
    std::optional<std::string> existing_key(std::size_t s, const std::string &table)
    {
        for (int attempt = 0; attempt < 8; ++attempt) {
            const auto probe = make_key(pick(spec_.key_space));
            std::set<std::string> candidates;
            if (auto c = committed_.find(table); c != committed_.end() && !open_[s].created.count(table)) {
                auto it = c->second.lower_bound(probe);
                if (it == c->second.end()) {
                    it = c->second.begin();
                }
                if (it != c->second.end()) {
                    candidates.insert(it->first);
                }
            }
            if (auto w = open_[s].writes.find(table); w != open_[s].writes.end()) {
                auto it = w->second.lower_bound(probe);
                if (it == w->second.end()) {
                    it = w->second.begin();
                }
                if (it != w->second.end()) {
                    candidates.insert(it->first);
                }
            }
            for (const auto &k : candidates) {
                if (!locked_elsewhere(s, table, k) && current(s, table, k)) {
                    return k;
                }
            }
        }
        return std::nullopt;
    }

    void claim(std::size_t s, const std::string &table, const std::string &key)
    {
        key_owner_[{table, key}] = s;
        users_[table].insert(s);
    }

    void step(std::size_t s)
    {
        auto &t = open_[s];
        const auto live = visible_tables(s, false);
        std::size_t live_count = committed_.size();
        for (const auto &[name, o] : owner_) {
            (void)o;
            live_count += committed_.count(name) ? 0 : 1;
        }
        if (live.empty() || live_count < spec_.table_count) {
            const auto name = "t" + std::to_string(next_table_++);
            const auto info = db_.create_table(t.txn, name);
            t.created.insert(name);
            owner_[name] = s;
            t.ops.push_back(TraceOp{TraceOp::Kind::CreateTable, name, {}, {}, info});
            ++result_.counters.creates;
            count_op();
            return;
        }
        const auto &m = spec_.mix;
        const auto total = m.insert + m.update + m.erase + m.drop_table;
        auto r = pick(total);
        const auto &table = live[pick(live.size())];
        if (r < m.insert) {
            for (int attempt = 0; attempt < 16; ++attempt) {
                const auto key = make_key(pick(spec_.key_space));
                if (locked_elsewhere(s, table, key) || current(s, table, key)) {
                    continue;
                }
                const auto v = value();
                db_.insert(t.txn, table, key, v);
                claim(s, table, key);
                t.writes[table][key] = v;
                t.ops.push_back(TraceOp{TraceOp::Kind::Insert, table, key, v, {}});
                ++result_.counters.inserts;
                break;
            }
        } else if (r < m.insert + m.update + m.erase) {
            if (const auto key = existing_key(s, table)) {
                if (r < m.insert + m.update) {
                    const auto v = value();
                    db_.update(t.txn, table, *key, v);
                    t.writes[table][*key] = v;
                    t.ops.push_back(TraceOp{TraceOp::Kind::Update, table, *key, v, {}});
                    ++result_.counters.updates;
                } else {
                    db_.erase(t.txn, table, *key);
                    t.writes[table][*key] = std::nullopt;
                    t.ops.push_back(TraceOp{TraceOp::Kind::Erase, table, *key, {}, {}});
                    ++result_.counters.erases;
                }
                claim(s, table, *key);
            }
        } else {
            const auto droppable = visible_tables(s, true);
            if (!droppable.empty()) {
                const auto &name = droppable[pick(droppable.size())];
                db_.drop_table(t.txn, name);
                t.dropped.insert(name);
                t.writes.erase(name);
                owner_[name] = s;
                t.ops.push_back(TraceOp{TraceOp::Kind::DropTable, name, {}, {}, {}});
                ++result_.counters.drops;
            }
        }
        count_op();
    }

    void count_op()
    {
        ++result_.counters.ops;
        tick();
    }

    void drop_claims(std::size_t s)
    {
        std::erase_if(key_owner_, [&](const auto &kv) { return kv.second == s; });
        std::erase_if(owner_, [&](const auto &kv) { return kv.second == s; });
        for (auto &[name, u] : users_) {
            u.erase(s);
        }
        // Slots above s shift down by one.
        for (auto &[k, o] : key_owner_) {
            if (o > s) {
                --o;
            }
        }
        for (auto &[k, o] : owner_) {
            if (o > s) {
                --o;
            }
        }
        for (auto &[name, u] : users_) {
            std::set<std::size_t> shifted;
            for (auto x : u) {
                shifted.insert(x > s ? x - 1 : x);
            }
            u = std::move(shifted);
        }
    }

    void finish(std::size_t s, bool abort)
    {
        auto &t = open_[s];
        if (abort) {
            db_.abort(t.txn);
            ++result_.counters.aborts;
        } else {
            db_.commit(t.txn);
            ++result_.counters.commits;
            for (const auto &name : t.created) {
                committed_.try_emplace(name);
            }
            for (const auto &[table, rows] : t.writes) {
                auto &dst = committed_[table];
                for (const auto &[k, v] : rows) {
                    if (v) {
                        dst[k] = *v;
                    } else {
                        dst.erase(k);
                    }
                }
            }
            for (const auto &name : t.dropped) {
                committed_.erase(name);
            }
            if (!t.ops.empty()) {
                result_.committed.push_back(CommittedTxn{t.txn.id(), t.txn.last_lsn(), std::move(t.ops)});
            }
        }
        tick();
        drop_claims(s);
        open_.erase(open_.begin() + static_cast<std::ptrdiff_t>(s));
    }

    Database &db_;
    const WorkloadSpec &spec_;
    ManualClock *clock_;
    std::mt19937_64 rng_;
    std::map<std::string, Rows> committed_;
    std::vector<OpenTxn> open_;
    std::map<std::pair<std::string, std::string>, std::size_t> key_owner_;
    std::map<std::string, std::size_t> owner_; // created or dropped by an open txn
    std::map<std::string, std::set<std::size_t>> users_;
    std::uint64_t next_table_ = 0;
    WorkloadResult result_;
};

} // namespace

WorkloadResult run_workload(Database &db, const WorkloadSpec &spec, ManualClock *clock)
{
    if (spec.max_txn_ops < spec.min_txn_ops || spec.min_txn_ops == 0 || spec.max_value < spec.min_value ||
        spec.key_space == 0) {
        throw Error(Errc::InvalidArgument, "inconsistent workload spec");
    }
    return Generator(db, spec, clock).run();
}

} // namespace chronodb::bench
