#include "chronodb/bench/oracle.hpp"

#include <algorithm>

namespace chronodb::bench {

void Oracle::attach(Database &db)
{
    for (PageNo no = 1; no < db.page_count(); ++no) {
        if (const auto m = db.read_page(no).mutation_count(); m != 0) {
            base_mutations_[no] = m;
        }
    }
    db.set_apply_observer([this](const LogRecord &rec, const Page &page) {
        Capture c;
        c.lsn = rec.lsn;
        c.mutation = is_page_mutation(rec);
        c.image = std::holds_alternative<PreformatPage>(rec.body);
        c.page = std::make_shared<const Page>(page);
        if (c.image && std::get<PreformatPage>(rec.body).reason == PreformatReason::Periodic) {
            ++periodic_images_;
        }
        captures_[rec.page].push_back(std::move(c));
    });
}

void Oracle::add(const WorkloadResult &result)
{
    for (const auto &t : result.committed) {
        add(t);
    }
}

void Oracle::add(const CommittedTxn &txn)
{
    auto pos = std::upper_bound(committed_.begin(), committed_.end(), txn.commit_lsn,
                                [](Lsn l, const CommittedTxn &t) { return l < t.commit_lsn; });
    committed_.insert(pos, txn);
}

Oracle::State Oracle::state_at(Lsn split) const
{
    std::map<std::string, TableInfo> catalog;
    std::map<std::string, std::map<std::string, std::string>> tables;
    for (const auto &t : committed_) {
        if (t.commit_lsn > split) {
            break;
        }
        for (const auto &op : t.ops) {
            switch (op.kind) {
            case TraceOp::Kind::CreateTable:
                catalog[op.table] = op.info;
                tables[op.table];
                break;
            case TraceOp::Kind::DropTable:
                catalog.erase(op.table);
                tables.erase(op.table);
                break;
            case TraceOp::Kind::Insert:
            case TraceOp::Kind::Update:
                tables[op.table][op.key] = op.value;
                break;
            case TraceOp::Kind::Erase:
                tables[op.table].erase(op.key);
                break;
            }
        }
    }
    State s;
    for (auto &[name, info] : catalog) {
        s.catalog.push_back(info);
    }
    for (auto &[name, rows] : tables) {
        auto &out = s.tables[name];
        for (auto &[k, v] : rows) {
            out.push_back(Row{k, v});
        }
    }
    return s;
}

std::optional<Page> Oracle::page_at(PageNo no, Lsn lsn) const
{
    auto it = captures_.find(no);
    if (it == captures_.end()) {
        return std::nullopt;
    }
    const auto &v = it->second;
    auto pos = std::upper_bound(v.begin(), v.end(), lsn, [](Lsn l, const Capture &c) { return l < c.lsn; });
    if (pos == v.begin()) {
        return std::nullopt;
    }
    return *std::prev(pos)->page;
}

std::uint64_t Oracle::records_between(PageNo no, Lsn lo, Lsn hi) const
{
    auto it = captures_.find(no);
    if (it == captures_.end()) {
        return 0;
    }
    return static_cast<std::uint64_t>(std::count_if(it->second.begin(), it->second.end(),
                                                    [&](const Capture &c) { return c.lsn > lo && c.lsn <= hi; }));
}

std::uint64_t Oracle::mutations_between(PageNo no, Lsn lo, Lsn hi) const
{
    auto it = captures_.find(no);
    if (it == captures_.end()) {
        return 0;
    }
    return static_cast<std::uint64_t>(std::count_if(it->second.begin(), it->second.end(), [&](const Capture &c) {
        return c.mutation && c.lsn > lo && c.lsn <= hi;
    }));
}

std::uint64_t Oracle::expected_rewind_reads(PageNo no, Lsn as_of, Lsn page_lsn, bool images) const
{
    if (page_lsn <= as_of) {
        return 0;
    }
    if (images) {
        if (auto it = captures_.find(no); it != captures_.end()) {
            for (const auto &c : it->second) {
                if (c.image && c.lsn > as_of && c.lsn <= page_lsn) {
                    return 1 + records_between(no, as_of, c.lsn.prev());
                }
            }
        }
    }
    return records_between(no, as_of, page_lsn);
}

std::uint64_t Oracle::mutations(PageNo no) const
{
    const auto base = base_mutations_.find(no);
    return (base == base_mutations_.end() ? 0 : base->second) + mutations_between(no, Lsn{}, Lsn{~0ull});
}

std::uint64_t Oracle::expected_periodic_images(std::uint32_t n) const
{
    if (n == 0) {
        return 0;
    }
    std::uint64_t total = 0;
    for (const auto no : pages()) {
        total += mutations(no) / n;
    }
    return total;
}

std::vector<PageNo> Oracle::pages() const
{
    std::vector<PageNo> out;
    for (const auto &[no, m] : base_mutations_) {
        out.push_back(no);
    }
    for (const auto &[no, v] : captures_) {
        if (!base_mutations_.count(no)) {
            out.push_back(no);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace chronodb::bench
