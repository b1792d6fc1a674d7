#pragma once

#include "chronodb/types.hpp"

#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace chronodb {

// A row lock names the tree (by root page) and the key inside it. Catalog
// entries are locked the same way under the catalog root.
struct LockKey {
    PageNo root = kNilPage;
    std::string key;

    auto operator<=>(const LockKey &) const = default;
};

enum class LockEvent { Acquired, Released };

// Exclusive key locks with a wait timeout (no deadlock detection).
class LockTable
{
public:
    using Observer = std::function<void(LockEvent, TxnId, const LockKey &)>;

    // A negative timeout waits forever.
    explicit LockTable(std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));

    // Re-entrant for the holder. Throws LockTimeout.
    void acquire(TxnId txn, const LockKey &key);
    void release_all(TxnId txn);

    // Blocks until no transaction holds `key` / any key of `root` within
    // [lo, hi). Throws SnapshotDropped once the table is closed.
    void wait_free(const LockKey &key);
    void wait_range(PageNo root, const std::optional<std::string> &lo, const std::optional<std::string> &hi);
    void close();

    [[nodiscard]] std::optional<TxnId> holder(const LockKey &key) const;
    [[nodiscard]] std::vector<LockKey> held_by(TxnId txn) const;
    [[nodiscard]] std::size_t size() const;
    void set_observer(Observer obs);

private:
    [[nodiscard]] bool range_busy(PageNo root, const std::optional<std::string> &lo,
                                  const std::optional<std::string> &hi) const;

    std::chrono::milliseconds timeout_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::map<LockKey, TxnId> held_;
    std::unordered_map<TxnId, std::vector<LockKey>> by_txn_;
    Observer observer_;
    bool closed_ = false;
};

} // namespace chronodb
