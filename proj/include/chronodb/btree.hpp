#pragma once

#include "chronodb/page_io.hpp"

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chronodb::btree {

// B-tree with a fixed root page. Leaves hold [key][value] rows in key order;
// internal rows are (separator, child) and a key is routed to the last entry
// whose separator is <= key. Splits move the upper half of a node to a new
// page (inserts on the new page, then deletes on the old one) and add a
// separator to the parent; the root splits in place so its page number never
// changes. Nodes never merge.

using Visitor = std::function<bool(std::string_view key, std::string_view value)>;

[[nodiscard]] std::optional<std::string> lookup(PageIo &io, PageNo root, std::string_view key);

// Keys in [lo, hi) in order; either bound may be absent. Stops when fn
// returns false.
void scan(PageIo &io, PageNo root, const std::optional<std::string> &lo, const std::optional<std::string> &hi,
          const Visitor &fn);

// Throws DuplicateKey.
void insert(PageIo &io, PageNo root, std::string_view key, std::string_view value);
// Replace the value of an existing key; returns the old value. NoSuchKey.
std::string update(PageIo &io, PageNo root, std::string_view key, std::string_view value);
// Removes a key; returns the old value. NoSuchKey.
std::string erase(PageIo &io, PageNo root, std::string_view key);

// Every page of the tree, parents before children.
[[nodiscard]] std::vector<PageNo> pages(PageIo &io, PageNo root);

struct Shape {
    std::size_t height = 0;
    std::size_t leaves = 0;
    std::size_t internals = 0;
};
[[nodiscard]] Shape shape(PageIo &io, PageNo root);

// Largest leaf row (key + value + 2) a tree with this page size accepts.
[[nodiscard]] std::size_t max_row_size(std::size_t page_size);

} // namespace chronodb::btree
