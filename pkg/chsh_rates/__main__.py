from chsh_rates.main import main

main()
