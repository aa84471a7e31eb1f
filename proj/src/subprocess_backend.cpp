#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstring>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#include "archseg/inference.hpp"
#include "archseg/io.hpp"

extern char** environ;

namespace archseg {
namespace fs = std::filesystem;

namespace {

std::string random_uuid() {
    std::random_device rd;
    std::uint8_t b[16];
    for (int i = 0; i < 16; i += 4) {
        const std::uint32_t v = rd();
        std::memcpy(b + i, &v, 4);
    }
    b[6] = static_cast<std::uint8_t>((b[6] & 0x0f) | 0x40);  // version 4
    b[8] = static_cast<std::uint8_t>((b[8] & 0x3f) | 0x80);  // RFC 4122 variant
    char s[37];
    std::snprintf(s, sizeof s, "%02x%02x%02x%02x-%02x%02x-%02x%02x-%02x%02x-%02x%02x%02x%02x%02x%02x",
                  b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7], b[8], b[9], b[10], b[11], b[12],
                  b[13], b[14], b[15]);
    return s;
}

// Removes the directory on scope exit unless told to keep it.
struct BatchDir {
    fs::path path;
    bool keep = false;
    ~BatchDir() {
        if (keep || path.empty()) return;
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

struct ExitStatus {
    bool timed_out = false;
    bool signalled = false;
    int code = 0;
};

ExitStatus run_and_wait(const std::vector<std::string>& argv, double timeout_s) {
    std::vector<char*> cargv;
    for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);

    pid_t pid = 0;
    const int rc = posix_spawnp(&pid, cargv[0], nullptr, nullptr, cargv.data(), environ);
    if (rc != 0) {
        throw ProtocolError("cannot launch backend '" + argv[0] + "': " + std::strerror(rc));
    }

    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                              std::chrono::duration<double>(timeout_s));
    auto delay = std::chrono::milliseconds(1);
    int status = 0;
    for (;;) {
        const pid_t w = ::waitpid(pid, &status, WNOHANG);
        if (w == pid) break;
        if (w < 0 && errno != EINTR) throw ProtocolError(std::string("waitpid failed: ") + std::strerror(errno));
        if (std::chrono::steady_clock::now() >= deadline) {
            ::kill(pid, SIGKILL);
            while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
            }
            return {true, false, -1};
        }
        std::this_thread::sleep_for(delay);
        delay = std::min(delay * 2, std::chrono::milliseconds(50));
    }
    if (WIFSIGNALED(status)) return {false, true, WTERMSIG(status)};
    return {false, false, WIFEXITED(status) ? WEXITSTATUS(status) : -1};
}

std::string done_message(const fs::path& dir) {
    std::error_code ec;
    if (!fs::exists(dir / "done.json", ec)) return "no done.json";
    try {
        const auto j = nlohmann::json::parse(read_text_file(dir / "done.json"));
        std::string s = "status " + j.value("status", std::string("?"));
        if (j.contains("message") && j["message"].is_string()) s += ": " + j["message"].get<std::string>();
        return s;
    } catch (const std::exception& e) {
        return std::string("unreadable done.json (") + e.what() + ")";
    }
}

}  // namespace

SubprocessBackend::SubprocessBackend(BackendSpec spec) : spec_(std::move(spec)) {
    spec_.kind = BackendKind::subprocess;
    spec_.validate();
}

std::vector<BinaryMask> SubprocessBackend::segment(std::span<const Image8> tiles, ObjectClass cls) {
    std::vector<BinaryMask> out;
    out.reserve(tiles.size());
    for (std::size_t start = 0; start < tiles.size(); start += spec_.batch_size) {
        const std::size_t n = std::min(spec_.batch_size, tiles.size() - start);
        try {
            auto part = run_one(tiles.subspan(start, n), cls);
            for (auto& m : part) out.push_back(std::move(m));
        } catch (const TileError& e) {
            throw TileError(start + e.tile(), e.what());
        }
    }
    return out;
}

std::vector<BinaryMask> SubprocessBackend::run_one(std::span<const Image8> tiles, ObjectClass cls) {
    const fs::path root = spec_.batch_root.empty() ? fs::temp_directory_path() : spec_.batch_root;
    BatchDir dir{root / ("batch-" + random_uuid()), spec_.keep_batches};
    fs::create_directories(dir.path / "tiles");
    last_dir_ = dir.path;

    nlohmann::json names = nlohmann::json::array();
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        const std::string rel = "tiles/" + std::to_string(i) + ".png";
        write_image(tiles[i], dir.path / rel);
        names.push_back(rel);
    }
    const nlohmann::json batch = {{"version", 1}, {"class", std::string(to_string(cls))}, {"tiles", names}};
    write_text_file(dir.path / "batch.json", batch.dump());

    std::vector<std::string> argv{spec_.command};
    argv.insert(argv.end(), spec_.args.begin(), spec_.args.end());
    argv.push_back("--batch");
    argv.push_back(dir.path.string());

    const ExitStatus st = run_and_wait(argv, spec_.timeout_s);
    if (st.timed_out) {
        throw ProtocolError("backend '" + spec_.command + "' timed out after " +
                            std::to_string(spec_.timeout_s) + " s");
    }
    if (st.signalled) {
        throw ProtocolError("backend '" + spec_.command + "' killed by signal " + std::to_string(st.code));
    }
    if (st.code != 0) {
        throw ProtocolError("backend '" + spec_.command + "' exited with code " +
                            std::to_string(st.code) + " (" + done_message(dir.path) + ")");
    }

    std::error_code ec;
    if (!fs::exists(dir.path / "done.json", ec)) throw ProtocolError("backend wrote no done.json");
    nlohmann::json done;
    try {
        done = nlohmann::json::parse(read_text_file(dir.path / "done.json"));
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("malformed done.json: ") + e.what());
    }
    if (!done.is_object() || !done.contains("status") || done["status"] != "ok") {
        throw ProtocolError("backend reported " + done_message(dir.path));
    }

    std::vector<BinaryMask> masks;
    masks.reserve(tiles.size());
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        const fs::path p = dir.path / "masks" / (std::to_string(i) + ".png");
        const std::string label = "tile " + std::to_string(i) + " (masks/" + std::to_string(i) + ".png)";
        if (!fs::exists(p, ec)) throw TileError(i, label + ": missing mask file");
        Image8 img;
        try {
            img = read_image(p);
        } catch (const Error& e) {
            throw TileError(i, label + ": " + e.what());
        }
        if (img.channels != 1) throw TileError(i, label + ": mask must be 8-bit gray");
        if (img.width != tiles[i].width || img.height != tiles[i].height) {
            throw TileError(i, label + ": mask is " + std::to_string(img.width) + "x" +
                                   std::to_string(img.height) + ", expected " +
                                   std::to_string(tiles[i].width) + "x" + std::to_string(tiles[i].height));
        }
        for (std::uint8_t v : img.data) {
            if (v != 0 && v != 255) {
                throw TileError(i, label + ": mask value " + std::to_string(v) + " is neither 0 nor 255");
            }
        }
        masks.push_back(image_to_mask(img));
    }
    return masks;
}

}  // namespace archseg
