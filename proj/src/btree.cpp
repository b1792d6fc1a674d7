#include "chronodb/btree.hpp"
#include "chronodb/error.hpp"

namespace chronodb::btree {

namespace {

// First slot whose key is >= key.
std::size_t lower_bound(const Page &p, std::string_view key)
{
    std::size_t lo = 0;
    std::size_t hi = p.slot_count();
    while (lo < hi) {
        const auto mid = (lo + hi) / 2;
        if (row_key(p.row(mid)) < key) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    return lo;
}

// First slot whose key is > key.
std::size_t upper_bound(const Page &p, std::string_view key)
{
    std::size_t lo = 0;
    std::size_t hi = p.slot_count();
    while (lo < hi) {
        const auto mid = (lo + hi) / 2;
        if (key < row_key(p.row(mid))) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    return lo;
}

std::size_t child_slot(const Page &p, std::string_view key)
{
    const auto ub = upper_bound(p, key);
    return ub == 0 ? 0 : ub - 1;
}

std::vector<PageNo> descend(PageIo &io, PageNo root, std::string_view key)
{
    std::vector<PageNo> path{root};
    for (;;) {
        const auto view = io.read(path.back());
        if (is_leaf_type(view->type()) || view->type() == PageType::Free) {
            return path;
        }
        if (view->type() != PageType::BtreeInternal || view->slot_count() == 0) {
            throw Error(Errc::CorruptRecord, "unexpected page " + std::to_string(path.back()) + " in tree " +
                                                 std::to_string(root));
        }
        path.push_back(row_child(view->row(child_slot(*view, key))));
    }
}

// Split point: the first slot at which the left part holds at least half the
// row bytes, kept within [1, n-1].
std::size_t split_point(const Page &p)
{
    const auto n = p.slot_count();
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        total += p.row(i).size();
    }
    std::size_t acc = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        acc += p.row(i).size();
        if (acc * 2 >= total) {
            return i + 1;
        }
    }
    return n - 1;
}

std::vector<std::string> rows_of(const Page &p, std::size_t from)
{
    std::vector<std::string> rows;
    for (std::size_t i = from; i < p.slot_count(); ++i) {
        rows.emplace_back(p.row(i));
    }
    return rows;
}

void move_rows(PageIo &io, PageNo root, PageNo from, PageNo to, std::size_t first)
{
    const auto rows = rows_of(*io.read(from), first);
    for (std::size_t j = 0; j < rows.size(); ++j) {
        io.apply(to, InsertRow{root, static_cast<std::uint16_t>(j), rows[j]});
    }
    for (std::size_t j = rows.size(); j-- > 0;) {
        io.apply(from, DeleteRow{root, static_cast<std::uint16_t>(first + j), rows[j]});
    }
}

void split_child(PageIo &io, PageNo root, PageNo node, PageNo parent)
{
    PageType type;
    std::size_t mid;
    std::string sep;
    {
        const auto v = io.read(node);
        type = v->type();
        mid = split_point(*v);
        sep = std::string(row_key(v->row(mid)));
    }
    const PageNo sibling = io.allocate(type);
    move_rows(io, root, node, sibling, mid);
    const auto pos = upper_bound(*io.read(parent), sep);
    io.apply(parent, InsertRow{root, static_cast<std::uint16_t>(pos), encode_internal_row(sep, sibling)});
}

void split_root(PageIo &io, PageNo root)
{
    PageType type;
    std::size_t mid;
    std::string sep;
    {
        const auto v = io.read(root);
        type = v->type();
        mid = split_point(*v);
        sep = std::string(row_key(v->row(mid)));
    }
    const PageNo left = io.allocate(type);
    const PageNo right = io.allocate(type);
    move_rows(io, root, root, right, mid);
    move_rows(io, root, root, left, 0);
    if (is_leaf_type(type)) {
        io.apply(root, FormatPage{PageType::BtreeInternal, FormatPrior::Empty, type});
    }
    io.apply(root, InsertRow{root, 0, encode_internal_row("", left)});
    io.apply(root, InsertRow{root, 1, encode_internal_row(sep, right)});
}

// Makes room along `path` by splitting the lowest node whose parent can take
// the new separator (or the root).
void split_for(PageIo &io, PageNo root, const std::vector<PageNo> &path)
{
    std::size_t i = path.size() - 1;
    while (i > 0) {
        std::string sep;
        {
            const auto v = io.read(path[i]);
            sep = std::string(row_key(v->row(split_point(*v))));
        }
        if (io.read(path[i - 1])->can_insert(encode_internal_row(sep, 0).size())) {
            break;
        }
        --i;
    }
    io.begin_smo();
    try {
        if (i == 0) {
            split_root(io, root);
        } else {
            split_child(io, root, path[i], path[i - 1]);
        }
    } catch (...) {
        io.end_smo();
        throw;
    }
    io.end_smo();
}

bool scan_node(PageIo &io, PageNo no, const std::optional<std::string> &lo, const std::optional<std::string> &hi,
               const Visitor &fn)
{
    const auto v = io.read(no);
    const auto n = v->slot_count();
    if (is_leaf_type(v->type())) {
        for (std::size_t s = lo ? lower_bound(*v, *lo) : 0; s < n; ++s) {
            const auto row = v->row(s);
            if (hi && row_key(row) >= *hi) {
                return false;
            }
            if (!fn(row_key(row), row_value(row))) {
                return false;
            }
        }
        return true;
    }
    const std::size_t first = lo ? child_slot(*v, *lo) : 0;
    std::vector<PageNo> children;
    for (std::size_t s = first; s < n; ++s) {
        const auto row = v->row(s);
        if (s > first && hi && row_key(row) >= *hi) {
            break;
        }
        children.push_back(row_child(row));
    }
    for (const auto child : children) {
        if (!scan_node(io, child, lo, hi, fn)) {
            return false;
        }
    }
    return true;
}

void check_row(std::size_t page_size, std::string_view key, std::string_view value)
{
    if (key.size() + value.size() + 2 > max_row_size(page_size)) {
        throw Error(Errc::InvalidArgument, "row of " + std::to_string(key.size() + value.size()) +
                                               " bytes exceeds the limit of " +
                                               std::to_string(max_row_size(page_size) - 2));
    }
}

} // namespace

std::size_t max_row_size(std::size_t page_size) { return Page::max_row_size(page_size); }

std::optional<std::string> lookup(PageIo &io, PageNo root, std::string_view key)
{
    const auto path = descend(io, root, key);
    const auto v = io.read(path.back());
    const auto s = lower_bound(*v, key);
    if (s < v->slot_count() && row_key(v->row(s)) == key) {
        return std::string(row_value(v->row(s)));
    }
    return std::nullopt;
}

void scan(PageIo &io, PageNo root, const std::optional<std::string> &lo, const std::optional<std::string> &hi,
          const Visitor &fn)
{
    if (lo && hi && *lo >= *hi) {
        return;
    }
    scan_node(io, root, lo, hi, fn);
}

void insert(PageIo &io, PageNo root, std::string_view key, std::string_view value)
{
    check_row(io.page_size(), key, value);
    const auto row = encode_leaf_row(key, value);
    for (;;) {
        const auto path = descend(io, root, key);
        std::size_t slot;
        {
            const auto v = io.read(path.back());
            slot = lower_bound(*v, key);
            if (slot < v->slot_count() && row_key(v->row(slot)) == key) {
                throw Error(Errc::DuplicateKey, "duplicate key");
            }
            if (!v->can_insert(row.size())) {
                slot = SIZE_MAX;
            }
        }
        if (slot != SIZE_MAX) {
            io.apply(path.back(), InsertRow{root, static_cast<std::uint16_t>(slot), row});
            return;
        }
        split_for(io, root, path);
    }
}

std::string update(PageIo &io, PageNo root, std::string_view key, std::string_view value)
{
    check_row(io.page_size(), key, value);
    const auto row = encode_leaf_row(key, value);
    for (;;) {
        const auto path = descend(io, root, key);
        std::size_t slot;
        std::string before;
        bool fits;
        {
            const auto v = io.read(path.back());
            slot = lower_bound(*v, key);
            if (slot >= v->slot_count() || row_key(v->row(slot)) != key) {
                throw Error(Errc::NoSuchKey, "no such key");
            }
            before = std::string(v->row(slot));
            fits = v->can_replace(slot, row.size());
        }
        if (fits) {
            io.apply(path.back(), UpdateRow{root, static_cast<std::uint16_t>(slot), before, row});
            return std::string(row_value(before));
        }
        split_for(io, root, path);
    }
}

std::string erase(PageIo &io, PageNo root, std::string_view key)
{
    const auto path = descend(io, root, key);
    std::size_t slot;
    std::string row;
    {
        const auto v = io.read(path.back());
        slot = lower_bound(*v, key);
        if (slot >= v->slot_count() || row_key(v->row(slot)) != key) {
            throw Error(Errc::NoSuchKey, "no such key");
        }
        row = std::string(v->row(slot));
    }
    io.apply(path.back(), DeleteRow{root, static_cast<std::uint16_t>(slot), row});
    return std::string(row_value(row));
}

std::vector<PageNo> pages(PageIo &io, PageNo root)
{
    std::vector<PageNo> out;
    std::vector<PageNo> stack{root};
    while (!stack.empty()) {
        const auto no = stack.back();
        stack.pop_back();
        out.push_back(no);
        const auto v = io.read(no);
        if (v->type() == PageType::BtreeInternal) {
            for (std::size_t s = v->slot_count(); s-- > 0;) {
                stack.push_back(row_child(v->row(s)));
            }
        }
    }
    return out;
}

Shape shape(PageIo &io, PageNo root)
{
    Shape sh;
    std::vector<std::pair<PageNo, std::size_t>> stack{{root, 1}};
    while (!stack.empty()) {
        const auto [no, depth] = stack.back();
        stack.pop_back();
        sh.height = std::max(sh.height, depth);
        const auto v = io.read(no);
        if (v->type() == PageType::BtreeInternal) {
            ++sh.internals;
            for (std::size_t s = 0; s < v->slot_count(); ++s) {
                stack.emplace_back(row_child(v->row(s)), depth + 1);
            }
        } else {
            ++sh.leaves;
        }
    }
    return sh;
}

} // namespace chronodb::btree
