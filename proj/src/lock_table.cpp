#include "chronodb/lock_table.hpp"
#include "chronodb/error.hpp"

namespace chronodb {

LockTable::LockTable(std::chrono::milliseconds timeout) : timeout_(timeout) {}

void LockTable::acquire(TxnId txn, const LockKey &key)
{
    std::unique_lock lock(mu_);
    auto free_or_mine = [&] {
        auto it = held_.find(key);
        return it == held_.end() || it->second == txn;
    };
    if (!free_or_mine()) {
        if (timeout_.count() < 0) {
            cv_.wait(lock, [&] { return closed_ || free_or_mine(); });
        } else if (!cv_.wait_for(lock, timeout_, [&] { return closed_ || free_or_mine(); })) {
            throw Error(Errc::LockTimeout, "lock wait timed out for txn " + std::to_string(txn));
        }
        if (closed_) {
            throw Error(Errc::SnapshotDropped, "lock table closed");
        }
    }
    if (held_.emplace(key, txn).second) {
        by_txn_[txn].push_back(key);
        if (observer_) {
            observer_(LockEvent::Acquired, txn, key);
        }
    }
}

void LockTable::release_all(TxnId txn)
{
    std::lock_guard lock(mu_);
    auto it = by_txn_.find(txn);
    if (it == by_txn_.end()) {
        return;
    }
    for (const auto &key : it->second) {
        held_.erase(key);
        if (observer_) {
            observer_(LockEvent::Released, txn, key);
        }
    }
    by_txn_.erase(it);
    cv_.notify_all();
}

void LockTable::wait_free(const LockKey &key)
{
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return closed_ || held_.count(key) == 0; });
    if (closed_) {
        throw Error(Errc::SnapshotDropped, "snapshot dropped while waiting for a lock");
    }
}

bool LockTable::range_busy(PageNo root, const std::optional<std::string> &lo,
                           const std::optional<std::string> &hi) const
{
    auto it = held_.lower_bound(LockKey{root, lo.value_or(std::string())});
    return it != held_.end() && it->first.root == root && (!hi || it->first.key < *hi);
}

void LockTable::wait_range(PageNo root, const std::optional<std::string> &lo, const std::optional<std::string> &hi)
{
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return closed_ || !range_busy(root, lo, hi); });
    if (closed_) {
        throw Error(Errc::SnapshotDropped, "snapshot dropped while waiting for a lock");
    }
}

void LockTable::close()
{
    std::lock_guard lock(mu_);
    closed_ = true;
    cv_.notify_all();
}

std::optional<TxnId> LockTable::holder(const LockKey &key) const
{
    std::lock_guard lock(mu_);
    if (auto it = held_.find(key); it != held_.end()) {
        return it->second;
    }
    return std::nullopt;
}

std::vector<LockKey> LockTable::held_by(TxnId txn) const
{
    std::lock_guard lock(mu_);
    if (auto it = by_txn_.find(txn); it != by_txn_.end()) {
        return it->second;
    }
    return {};
}

std::size_t LockTable::size() const
{
    std::lock_guard lock(mu_);
    return held_.size();
}

void LockTable::set_observer(Observer obs)
{
    std::lock_guard lock(mu_);
    observer_ = std::move(obs);
}

} // namespace chronodb
