from affinitykg.cli import entrypoint

entrypoint()
