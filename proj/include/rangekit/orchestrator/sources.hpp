#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rangekit::orchestrator {

/// Sandbox definition files as found in a local directory or repository.
struct SandboxSource {
    std::string location;  // directory path or repository URL as given
    std::string commit;    // pinned revision for repositories, empty for directories
    std::string topology_yaml;
    std::optional<std::string> provisioning_yaml;
};

/// True for git URLs (`https://...`, `ssh://...`, `git@host:...`, `file://...`,
/// or anything ending in `.git`).
bool is_repository_url(const std::string& location);

/// Reads topology.yml (or .yaml) and, when present, provisioning/playbook.yml
/// or playbook.yml from `dir`. Throws Error{DefinitionNotFound}.
SandboxSource load_directory(const std::filesystem::path& dir);

/// Shallow-clones `url` (at `ref` when given) into `workdir`, loads the
/// definition from `subdir` inside it and records the checked-out commit.
/// Throws Error{DefinitionNotFound} when git fails.
SandboxSource fetch_repository(const std::string& url, const std::optional<std::string>& ref,
                               const std::filesystem::path& subdir, const std::filesystem::path& workdir);

/// Runs argv without a shell and returns {exit status, stdout}.
std::pair<int, std::string> run_process(const std::vector<std::string>& argv);

}  // namespace rangekit::orchestrator
