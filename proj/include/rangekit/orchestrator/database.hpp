#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

struct sqlite3;
struct sqlite3_stmt;

namespace rangekit::orchestrator {


/// Prepared statement; parameters bind positionally from 1.
class Statement {
public:
    Statement(sqlite3* db, std::string_view sql);
    ~Statement();
    Statement(const Statement&) = delete;
    Statement& operator=(const Statement&) = delete;

    Statement& bind(int index, std::int64_t value);
    Statement& bind(int index, std::string_view value);
    Statement& bind(int index, std::nullptr_t);
    Statement& bind(int index, const std::optional<std::int64_t>& value);

    /// Advances to the next row; false when done.
    bool step();
    void run();  // step until done

    std::int64_t int_at(int column) const;
    std::string text_at(int column) const;
    bool is_null(int column) const;

private:
    sqlite3* db_;
    sqlite3_stmt* stmt_ = nullptr;
};

/// One SQLite connection in WAL mode. Callers serialize access through
/// lock(); a Transaction commits on commit() and rolls back otherwise.
class Database {
public:
    /// An empty path opens a private in-memory database.
    explicit Database(const std::filesystem::path& path);
    ~Database();
    Database(const Database&) = delete;
    Database& operator=(const Database&) = delete;

    std::unique_lock<std::recursive_mutex> lock() { return std::unique_lock(mutex_); }
    void exec(std::string_view sql);
    Statement prepare(std::string_view sql) { return Statement(db_, sql); }
    std::int64_t last_insert_id() const;

    class Transaction {
    public:
        explicit Transaction(Database& db);
        ~Transaction();
        void commit();

    private:
        Database& db_;
        std::unique_lock<std::recursive_mutex> lock_;
        bool done_ = false;
    };

private:
    sqlite3* db_ = nullptr;
    std::recursive_mutex mutex_;
};

}  // namespace rangekit::orchestrator
