#include "rangekit/orchestrator/sources.hpp"

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <fstream>
#include <sstream>

#include "rangekit/core/error.hpp"

extern char** environ;

namespace rangekit::orchestrator {

namespace {

std::optional<std::string> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool starts_with(const std::string& s, std::string_view prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

bool is_repository_url(const std::string& location) {
    return starts_with(location, "https://") || starts_with(location, "http://") || starts_with(location, "ssh://") ||
           starts_with(location, "git@") || starts_with(location, "file://") || starts_with(location, "git://") ||
           (location.size() > 4 && location.compare(location.size() - 4, 4, ".git") == 0);
}

SandboxSource load_directory(const std::filesystem::path& dir) {
    SandboxSource src;
    src.location = dir.string();
    for (auto name : {"topology.yml", "topology.yaml"}) {
        if (auto text = read_file(dir / name)) {
            src.topology_yaml = std::move(*text);
            break;
        }
    }
    if (src.topology_yaml.empty()) {
        throw Error(ErrorCode::DefinitionNotFound, "no topology.yml in " + dir.string());
    }
    for (auto name : {"provisioning/playbook.yml", "provisioning/playbook.yaml", "playbook.yml"}) {
        if (auto text = read_file(dir / name)) {
            src.provisioning_yaml = std::move(*text);
            break;
        }
    }
    return src;
}

std::pair<int, std::string> run_process(const std::vector<std::string>& argv) {
    int pipefd[2];
    if (::pipe(pipefd) != 0) throw Error(ErrorCode::Io, "pipe failed");
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, pipefd[1], STDOUT_FILENO);
    posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, "/dev/null", O_WRONLY, 0);
    posix_spawn_file_actions_addclose(&actions, pipefd[0]);
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    pid_t pid = 0;
    int rc = posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(pipefd[1]);
    if (rc != 0) {
        ::close(pipefd[0]);
        throw Error(ErrorCode::Io, "cannot run " + argv[0]);
    }
    std::string out;
    char buf[4096];
    for (ssize_t n; (n = ::read(pipefd[0], buf, sizeof buf)) > 0;) out.append(buf, static_cast<std::size_t>(n));
    ::close(pipefd[0]);
    int status = 0;
    ::waitpid(pid, &status, 0);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

SandboxSource fetch_repository(const std::string& url, const std::optional<std::string>& ref,
                               const std::filesystem::path& subdir, const std::filesystem::path& workdir) {
    static std::atomic<int> counter{0};
    std::filesystem::create_directories(workdir);
    auto target = workdir / ("checkout-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(target);

    std::vector<std::string> clone{"git", "clone", "--quiet", "--depth", "1"};
    if (ref) {
        clone.push_back("--branch");
        clone.push_back(*ref);
    }
    clone.push_back("--");
    clone.push_back(url);
    clone.push_back(target.string());
    if (run_process(clone).first != 0) {
        throw Error(ErrorCode::DefinitionNotFound, "cannot fetch " + url + (ref ? " at " + *ref : std::string()));
    }
    auto [status, head] = run_process({"git", "-C", target.string(), "rev-parse", "HEAD"});
    if (status != 0) throw Error(ErrorCode::DefinitionNotFound, "cannot resolve HEAD of " + url);
    while (!head.empty() && (head.back() == '\n' || head.back() == '\r')) head.pop_back();

    auto src = load_directory(target / subdir);
    src.location = url;
    src.commit = head;
    std::filesystem::remove_all(target);
    return src;
}

}  // namespace rangekit::orchestrator
