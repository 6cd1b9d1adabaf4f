from cli.main import crbm

crbm(prog_name="crbm")
